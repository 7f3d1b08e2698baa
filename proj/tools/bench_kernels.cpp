// Compares the serial reference kernels against their OpenMP variants.
// The pairs are bit-identical by construction; this reports throughput.

#include "geoward/dataset.hpp"
#include "geoward/kernels.hpp"
#include "geoward/network.hpp"
#include "geoward/rng.hpp"
#include "geoward/threads.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

using namespace geoward;

namespace {

double time_ms(const std::function<void()>& fn, int reps)
{
    fn(); // warm-up
    const auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms)
{
    std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %.2fx\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms);
}

} // namespace

int main()
{
    init_threads_from_env();
    std::printf("threads: %d\n", thread_count());

    struct Case {
        std::vector<int> arch;
        int per_class;
        int reps;
    };
    const std::vector<Case> cases = {
        {{8, 32, 4}, 64, 5},
        {{16, 48, 8}, 64, 3},
        {{32, 64, 10}, 96, 2},
    };

    for (const auto& c : cases) {
        NetworkSpec spec{c.arch, Activation::tanh_act, OutputMode::softmax};
        Rng rng(1);
        FlatWeights w(spec);
        for (auto& v : w.values()) v = 0.5 * rng.normal();

        const Dataset d =
            synth_gaussians(c.arch.back(), c.arch.front(), c.per_class, 3.0, 7);
        const Batch batch(d);
        const std::vector<double> du = rng.normal_vector(w.size());
        const std::size_t n = w.size();

        std::printf("\narch %d-%d-%d  (n=%zu weights, %zu examples)\n", c.arch[0], c.arch[1],
                    c.arch[2], n, d.size());

        std::vector<double> gram(n * n);
        report("gram_accumulate",
               time_ms([&] {
                   std::fill(gram.begin(), gram.end(), 0.0);
                   gram_accumulate_serial(spec, w, batch, gram);
               }, c.reps),
               time_ms([&] {
                   std::fill(gram.begin(), gram.end(), 0.0);
                   gram_accumulate_parallel(spec, w, batch, gram);
               }, c.reps));

        report("directional_sq",
               time_ms([&] { directional_sq_serial(spec, w, batch, du); }, c.reps * 8),
               time_ms([&] { directional_sq_parallel(spec, w, batch, du); }, c.reps * 8));

        report("eval",
               time_ms([&] { eval_serial(spec, w, d, LossKind::cross_entropy); }, c.reps * 8),
               time_ms([&] { eval_parallel(spec, w, d, LossKind::cross_entropy); }, c.reps * 8));
    }
    return 0;
}

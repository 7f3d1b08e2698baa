#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace geoward {

// Classification dataset: row-major inputs (count x dim) plus class labels.
// Immutable after construction; shareable read-only across threads.
struct Dataset {
    std::vector<double> values; // count * dim
    std::vector<int> labels;
    int dim = 0;
    int num_classes = 0;
    std::string name;
    double norm_shift = 0.0; // raw = value / norm_scale + norm_shift
    double norm_scale = 1.0;
    int image_rows = 0; // 0 when not image data
    int image_cols = 0;

    std::size_t size() const { return labels.size(); }
    const double* input(std::size_t i) const { return values.data() + i * dim; }
    std::vector<double> input_vector(std::size_t i) const
    {
        return {input(i), input(i) + dim};
    }

    void validate() const;
};

// IDX ingestion (magic 0x00000803 images / 0x00000801 labels, big-endian
// dimension fields). Pixels are scaled from [0,255] to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Average pooling of square image datasets by an integer factor; the factor
// is recorded in the dataset name.
Dataset average_pool(const Dataset& d, int factor);

// Isotropic unit-variance Gaussians centered at separation * mu_c with the
// class means mu_c on the unit sphere, all deterministic from the seed.
Dataset synth_gaussians(int classes, int dim, int per_class, double separation,
                        std::uint64_t seed);

// Uniform subsample without replacement, deterministic under seed.
Dataset subsample(const Dataset& d, std::size_t count, std::uint64_t seed);

// CSV export: one row per example, label first, then the features.
void save_csv(const Dataset& d, const std::string& path);

// FNV-1a over dims, labels and raw value bytes; stable across runs.
std::string dataset_fingerprint(const Dataset& d);

// View of a dataset restricted to an id list. Metric batches canonicalize
// ids in ascending order so the accumulation order never depends on how the
// batch was presented.
struct Batch {
    const Dataset* data = nullptr;
    std::vector<int> ids;

    Batch() = default;
    Batch(const Dataset& d, std::vector<int> example_ids);
    explicit Batch(const Dataset& d); // all examples

    std::size_t size() const { return ids.size(); }
    const double* input(std::size_t k) const { return data->input(ids[k]); }
    int label(std::size_t k) const { return data->labels[ids[k]]; }
};

// Deterministic round-robin batch schedule: step s covers ids
// [s*B, s*B+B) modulo the dataset size, then canonicalized.
Batch round_robin_batch(const Dataset& d, std::size_t batch_size, std::size_t step);

} // namespace geoward

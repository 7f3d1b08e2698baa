#include "geoward/dataset.hpp"

#include "geoward/errors.hpp"
#include "geoward/linalg.hpp"
#include "geoward/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace geoward {

void Dataset::validate() const
{
    if (labels.empty()) throw invalid_input_error("Dataset: empty");
    if (values.size() != labels.size() * static_cast<std::size_t>(dim))
        throw invalid_input_error("Dataset: value/label count mismatch");
    for (double v : values)
        if (!std::isfinite(v)) throw invalid_input_error("Dataset: non-finite value");
    for (int l : labels)
        if (l < 0 || l >= num_classes)
            throw invalid_input_error("Dataset: label out of range");
}

namespace {

std::uint32_t read_u32_be(std::ifstream& f)
{
    unsigned char buf[4];
    f.read(reinterpret_cast<char*>(buf), 4);
    return (static_cast<std::uint32_t>(buf[0]) << 24) |
           (static_cast<std::uint32_t>(buf[1]) << 16) |
           (static_cast<std::uint32_t>(buf[2]) << 8) | static_cast<std::uint32_t>(buf[3]);
}

std::string hex_u32(std::uint32_t v)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path)
{
    std::ifstream imf(images_path, std::ios::binary);
    if (!imf) throw invalid_input_error("load_idx: cannot open " + images_path);
    std::ifstream lbf(labels_path, std::ios::binary);
    if (!lbf) throw invalid_input_error("load_idx: cannot open " + labels_path);

    const std::uint32_t im_magic = read_u32_be(imf);
    if (!imf || im_magic != 0x00000803u)
        throw format_error("load_idx: bad image magic " + hex_u32(im_magic) + " in " +
                           images_path);
    const std::uint32_t lb_magic = read_u32_be(lbf);
    if (!lbf || lb_magic != 0x00000801u)
        throw format_error("load_idx: bad label magic " + hex_u32(lb_magic) + " in " +
                           labels_path);

    const std::uint32_t n_images = read_u32_be(imf);
    const std::uint32_t rows = read_u32_be(imf);
    const std::uint32_t cols = read_u32_be(imf);
    const std::uint32_t n_labels = read_u32_be(lbf);
    if (!imf || !lbf) throw format_error("load_idx: truncated header");
    if (n_images != n_labels)
        throw format_error("load_idx: image count " + std::to_string(n_images) +
                           " != label count " + std::to_string(n_labels));
    if (n_images == 0) throw format_error("load_idx: empty dataset");

    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    Dataset d;
    d.dim = static_cast<int>(pixels);
    d.image_rows = static_cast<int>(rows);
    d.image_cols = static_cast<int>(cols);
    d.values.resize(static_cast<std::size_t>(n_images) * pixels);
    d.labels.resize(n_images);
    d.norm_shift = 0.0;
    d.norm_scale = 1.0 / 255.0;

    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        imf.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
        if (!imf) throw format_error("load_idx: image file truncated at image " +
                                     std::to_string(i));
        double* out = d.values.data() + static_cast<std::size_t>(i) * pixels;
        for (std::size_t p = 0; p < pixels; ++p) out[p] = buf[p] / 255.0;
    }
    int max_label = 0;
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        unsigned char l;
        lbf.read(reinterpret_cast<char*>(&l), 1);
        if (!lbf) throw format_error("load_idx: label file truncated at label " +
                                     std::to_string(i));
        d.labels[i] = l;
        max_label = std::max(max_label, static_cast<int>(l));
    }
    d.num_classes = max_label + 1;
    d.name = "idx-" + std::to_string(rows) + "x" + std::to_string(cols);
    d.validate();
    return d;
}

Dataset average_pool(const Dataset& d, int factor)
{
    if (factor < 1) throw invalid_input_error("average_pool: factor must be >= 1");
    if (factor == 1) return d;
    if (d.image_rows <= 0 || d.image_cols <= 0)
        throw invalid_input_error("average_pool: dataset is not image data");
    if (d.image_rows % factor != 0 || d.image_cols % factor != 0)
        throw invalid_input_error("average_pool: image dims not divisible by factor");

    const int R = d.image_rows / factor;
    const int C = d.image_cols / factor;
    Dataset out;
    out.dim = R * C;
    out.image_rows = R;
    out.image_cols = C;
    out.labels = d.labels;
    out.num_classes = d.num_classes;
    out.norm_shift = d.norm_shift;
    out.norm_scale = d.norm_scale * factor * factor; // pooled mean of scaled pixels
    out.name = d.name + "-pool" + std::to_string(factor);
    out.values.resize(d.size() * static_cast<std::size_t>(out.dim));

    const double inv = 1.0 / (factor * factor);
    for (std::size_t e = 0; e < d.size(); ++e) {
        const double* src = d.input(e);
        double* dst = out.values.data() + e * static_cast<std::size_t>(out.dim);
        for (int r = 0; r < R; ++r)
            for (int c = 0; c < C; ++c) {
                double s = 0.0;
                for (int dr = 0; dr < factor; ++dr)
                    for (int dc = 0; dc < factor; ++dc)
                        s += src[(r * factor + dr) * d.image_cols + (c * factor + dc)];
                dst[r * C + c] = s * inv;
            }
    }
    return out;
}

Dataset synth_gaussians(int classes, int dim, int per_class, double separation,
                        std::uint64_t seed)
{
    if (classes < 2) throw invalid_input_error("synth_gaussians: need >= 2 classes");
    if (dim < 2) throw invalid_input_error("synth_gaussians: need dim >= 2");
    if (per_class < 1) throw invalid_input_error("synth_gaussians: need per_class >= 1");

    Rng rng(seed);

    // Class means on the unit sphere. For classes <= dim+1 they form a
    // regular simplex under a random rotation, so the pairwise spacing does
    // not depend on the seed; otherwise fall back to normalized draws.
    std::vector<std::vector<double>> means(classes);
    if (classes <= dim + 1) {
        const int m = classes;
        // Orthonormal basis of the centered-coordinates subspace in R^m.
        std::vector<std::vector<double>> basis;
        for (int i = 0; i + 1 < m; ++i) {
            std::vector<double> v(m, -1.0 / m);
            v[i] += 1.0;
            for (const auto& b : basis) {
                const double d = dot(v, b);
                for (int j = 0; j < m; ++j) v[j] -= d * b[j];
            }
            const double nv = norm2(v);
            for (auto& x : v) x /= nv;
            basis.push_back(std::move(v));
        }
        // Random orthonormal frame in R^dim.
        std::vector<std::vector<double>> frame;
        for (int c = 0; c + 1 < m; ++c) {
            std::vector<double> v;
            double nv = 0.0;
            do {
                v = rng.normal_vector(dim);
                for (const auto& b : frame) {
                    const double d = dot(v, b);
                    for (int j = 0; j < dim; ++j) v[j] -= d * b[j];
                }
                nv = norm2(v);
            } while (nv < 1e-8);
            for (auto& x : v) x /= nv;
            frame.push_back(std::move(v));
        }
        const double vertex_norm = std::sqrt(1.0 - 1.0 / m);
        for (int c = 0; c < m; ++c) {
            std::vector<double> vertex(m, -1.0 / m);
            vertex[c] += 1.0;
            for (auto& x : vertex) x /= vertex_norm;
            std::vector<double> mu(dim, 0.0);
            for (int i = 0; i + 1 < m; ++i) {
                const double t = dot(basis[i], vertex);
                for (int j = 0; j < dim; ++j) mu[j] += t * frame[i][j];
            }
            means[c] = std::move(mu);
        }
    } else {
        for (int c = 0; c < classes; ++c) {
            std::vector<double> mu = rng.normal_vector(dim);
            double nrm = norm2(mu);
            while (nrm < 1e-12) {
                mu = rng.normal_vector(dim);
                nrm = norm2(mu);
            }
            for (auto& x : mu) x /= nrm;
            means[c] = std::move(mu);
        }
    }

    Dataset d;
    d.dim = dim;
    d.num_classes = classes;
    d.values.resize(static_cast<std::size_t>(classes) * per_class * dim);
    d.labels.resize(static_cast<std::size_t>(classes) * per_class);
    std::ostringstream nm;
    nm << "synth-c" << classes << "-d" << dim << "-n" << per_class << "-sep" << separation
       << "-s" << seed;
    d.name = nm.str();

    std::size_t e = 0;
    for (int c = 0; c < classes; ++c) {
        for (int k = 0; k < per_class; ++k, ++e) {
            double* out = d.values.data() + e * dim;
            for (int j = 0; j < dim; ++j) out[j] = separation * means[c][j] + rng.normal();
            d.labels[e] = c;
        }
    }
    d.validate();
    return d;
}

Dataset subsample(const Dataset& d, std::size_t count, std::uint64_t seed)
{
    if (count == 0) throw invalid_input_error("subsample: count must be >= 1");
    if (count > d.size())
        throw invalid_input_error("subsample: count exceeds dataset size");

    // Partial Fisher-Yates picks `count` distinct positions.
    std::vector<std::size_t> pool(d.size());
    std::iota(pool.begin(), pool.end(), 0);
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.uniform_below(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    std::sort(pool.begin(), pool.end());

    Dataset out;
    out.dim = d.dim;
    out.num_classes = d.num_classes;
    out.name = d.name + "-sub" + std::to_string(count);
    out.norm_shift = d.norm_shift;
    out.norm_scale = d.norm_scale;
    out.image_rows = d.image_rows;
    out.image_cols = d.image_cols;
    out.values.resize(count * static_cast<std::size_t>(d.dim));
    out.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::memcpy(out.values.data() + i * d.dim, d.input(pool[i]),
                    sizeof(double) * d.dim);
        out.labels[i] = d.labels[pool[i]];
    }
    return out;
}

void save_csv(const Dataset& d, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw invalid_input_error("save_csv: cannot open " + path);
    f << "label";
    for (int j = 0; j < d.dim; ++j) f << ",x" << j;
    f << "\n";
    f.precision(17);
    for (std::size_t i = 0; i < d.size(); ++i) {
        f << d.labels[i];
        const double* row = d.input(i);
        for (int j = 0; j < d.dim; ++j) f << "," << row[j];
        f << "\n";
    }
}

std::string dataset_fingerprint(const Dataset& d)
{
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    const std::uint64_t count = d.size();
    const std::uint64_t dim = d.dim;
    mix(&count, sizeof(count));
    mix(&dim, sizeof(dim));
    mix(d.labels.data(), d.labels.size() * sizeof(int));
    mix(d.values.data(), d.values.size() * sizeof(double));
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Batch::Batch(const Dataset& d, std::vector<int> example_ids) : data(&d), ids(std::move(example_ids))
{
    for (int id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= d.size())
            throw invalid_input_error("Batch: id out of range");
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw invalid_input_error("Batch: empty id list");
}

Batch::Batch(const Dataset& d) : data(&d)
{
    ids.resize(d.size());
    std::iota(ids.begin(), ids.end(), 0);
}

Batch round_robin_batch(const Dataset& d, std::size_t batch_size, std::size_t step)
{
    const std::size_t N = d.size();
    const std::size_t B = std::min(batch_size, N);
    std::vector<int> ids(B);
    for (std::size_t k = 0; k < B; ++k)
        ids[k] = static_cast<int>((step * B + k) % N);
    return Batch(d, std::move(ids));
}

} // namespace geoward

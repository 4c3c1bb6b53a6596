#include "interlab/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "interlab/errors.hpp"
#include "interlab/random.hpp"

namespace interlab {

void Dataset::validate() const {
    if (xs.size() != ys.size())
        throw IngestionError("dataset has " + std::to_string(xs.size()) +
                             " inputs but " + std::to_string(ys.size()) + " labels");
    for (const Tensor& x : xs)
        if (x.numel() != dim())
            throw ShapeError("dataset input size " + std::to_string(x.numel()) +
                             " does not match raster " + std::to_string(height) +
                             "x" + std::to_string(width));
    for (std::size_t y : ys)
        if (y >= num_classes)
            throw LabelError("dataset label " + std::to_string(y) +
                             " out of range [0, " + std::to_string(num_classes) + ")");
}

namespace {

Dataset sample_blobs(const DatasetSpec& spec,
                     const std::vector<std::vector<double>>& centers,
                     std::size_t count, RandomStream& rng) {
    Dataset d;
    d.height = spec.height;
    d.width = spec.width;
    d.num_classes = spec.num_classes;
    std::size_t n = spec.height * spec.width;
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t y = static_cast<std::size_t>(rng.uniform_int(spec.num_classes));
        Tensor x({n});
        for (std::size_t j = 0; j < n; ++j) {
            double v = centers[y][j] + spec.cluster_spread * rng.normal();
            x.data[j] = std::clamp(v, 0.0, 1.0);
        }
        d.xs.push_back(std::move(x));
        d.ys.push_back(y);
    }
    return d;
}

std::uint32_t read_u32_be(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw MalformedFileError("unexpected end of file in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

SplitDataset make_blobs(const DatasetSpec& spec) {
    if (spec.num_classes < 2)
        throw ConfigError("synthetic blobs need at least 2 classes");
    if (spec.height == 0 || spec.width == 0)
        throw ConfigError("synthetic blobs need a nonempty raster");
    if (spec.cluster_spread < 0)
        throw ConfigError("cluster spread must be nonnegative");

    std::size_t n = spec.height * spec.width;
    RandomStream center_rng(derive_seed(spec.seed, 0x63656e74));
    std::vector<std::vector<double>> centers(spec.num_classes,
                                             std::vector<double>(n));
    for (auto& c : centers)
        for (double& v : c) v = center_rng.uniform(0.15, 0.85);

    SplitDataset out;
    RandomStream train_rng(derive_seed(spec.seed, 0x747261696e));
    RandomStream test_rng(derive_seed(spec.seed, 0x74657374));
    out.train = sample_blobs(spec, centers, spec.train_count, train_rng);
    out.test = sample_blobs(spec, centers, spec.test_count, test_rng);
    return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgf(images_path, std::ios::binary);
    if (!imgf) throw IoError("cannot open " + images_path);
    std::uint32_t magic = read_u32_be(imgf, images_path);
    if (magic != 0x00000803u)
        throw FormatError(images_path + " is not an IDX image file (magic " +
                          std::to_string(magic) + ")");
    std::uint32_t count = read_u32_be(imgf, images_path);
    std::uint32_t rows = read_u32_be(imgf, images_path);
    std::uint32_t cols = read_u32_be(imgf, images_path);
    if (rows == 0 || cols == 0)
        throw MalformedFileError(images_path + " declares an empty raster");

    std::ifstream labf(labels_path, std::ios::binary);
    if (!labf) throw IoError("cannot open " + labels_path);
    std::uint32_t lmagic = read_u32_be(labf, labels_path);
    if (lmagic != 0x00000801u)
        throw FormatError(labels_path + " is not an IDX label file (magic " +
                          std::to_string(lmagic) + ")");
    std::uint32_t lcount = read_u32_be(labf, labels_path);
    if (lcount != count)
        throw IngestionError("image/label counts disagree: " +
                             std::to_string(count) + " vs " + std::to_string(lcount));

    Dataset d;
    d.height = rows;
    d.width = cols;
    std::size_t n = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> buf(n);
    std::size_t max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!imgf.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n)))
            throw MalformedFileError(images_path + " truncated at image " +
                                     std::to_string(i));
        Tensor x({n});
        for (std::size_t j = 0; j < n; ++j) x.data[j] = buf[j] / 255.0;
        unsigned char label;
        if (!labf.read(reinterpret_cast<char*>(&label), 1))
            throw MalformedFileError(labels_path + " truncated at label " +
                                     std::to_string(i));
        d.xs.push_back(std::move(x));
        d.ys.push_back(label);
        max_label = std::max<std::size_t>(max_label, label);
    }
    d.num_classes = max_label + 1;
    d.validate();
    return d;
}

SplitDataset load_dataset(const DatasetSpec& spec) {
    if (spec.kind == DatasetSpec::Kind::synthetic_blobs) return make_blobs(spec);
    SplitDataset out;
    out.train = load_idx(spec.train_images, spec.train_labels);
    out.test = load_idx(spec.test_images, spec.test_labels);
    if (out.train.num_classes != out.test.num_classes) {
        std::size_t c = std::max(out.train.num_classes, out.test.num_classes);
        out.train.num_classes = c;
        out.test.num_classes = c;
    }
    return out;
}

}  // namespace interlab

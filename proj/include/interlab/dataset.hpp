#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "interlab/tensor.hpp"

namespace interlab {

// Labeled inputs in [0,1]^(height*width), stored flat.
struct Dataset {
    std::size_t height = 1;
    std::size_t width = 0;
    std::size_t num_classes = 0;
    std::vector<Tensor> xs;
    std::vector<std::size_t> ys;

    std::size_t size() const { return xs.size(); }
    std::size_t dim() const { return height * width; }

    // Throws if xs/ys sizes differ, a label is out of range, or an input
    // does not match height*width.
    void validate() const;
};

struct DatasetSpec {
    enum class Kind { synthetic_blobs, idx_files };

    Kind kind = Kind::synthetic_blobs;

    // synthetic-blobs parameters
    std::size_t num_classes = 5;
    std::size_t height = 4;
    std::size_t width = 8;
    double cluster_spread = 0.08;
    std::size_t train_count = 2000;
    std::size_t test_count = 500;
    std::uint64_t seed = 1;

    // idx-files parameters (images + labels per split)
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
};

struct SplitDataset {
    Dataset train;
    Dataset test;
};

// Gaussian clusters around per-class centers drawn uniformly inside the
// unit box, points clipped back into [0,1]. Deterministic in the seed.
SplitDataset make_blobs(const DatasetSpec& spec);

// IDX image/label files (the common u8 raster format): images use magic
// 0x00000803 with big-endian count/rows/cols, labels 0x00000801. Pixels
// are scaled to [0,1]. Throws FormatError on a bad magic, MalformedFileError
// on truncation, IngestionError when image/label counts disagree.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

SplitDataset load_dataset(const DatasetSpec& spec);

}  // namespace interlab

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snnadv/tensor.hpp"

namespace snnadv {

/// Labelled samples. images is [n, features]; sample_shape describes one row.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  Shape sample_shape;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  /// Rows in `indices` order.
  Dataset subset(const std::vector<std::size_t>& indices) const;
  /// Rows [begin, end).
  Dataset slice(std::size_t begin, std::size_t end) const;
  std::vector<std::size_t> class_counts() const;
};

/// IDX pair reader: images magic 0x00000803 (u8, count x rows x cols),
/// labels magic 0x00000801. Pixels are scaled to [0, 1].
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

/// Same parser over in-memory bytes.
Dataset parse_mnist_idx(const std::vector<std::uint8_t>& images,
                        const std::vector<std::uint8_t>& labels);

/// Gaussian class blobs in [0, 1]^dim with `n / classes` samples per class
/// (remainder spread over the first classes), shuffled.
Dataset synth_blobs(std::size_t n, std::size_t classes, std::size_t dim, std::uint64_t seed,
                    double spread = 0.05);

struct Split {
  Dataset train;
  Dataset test;
};

/// First `train_count` rows train, the rest test.
Split split_dataset(const Dataset& data, std::size_t train_count);

}  // namespace snnadv

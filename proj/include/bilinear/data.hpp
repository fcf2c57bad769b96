#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bilinear/objective.hpp"
#include "bilinear/tensor.hpp"

namespace bilinear {

struct ByteImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;  // row-major, rows*cols entries
  std::uint8_t at(int i, int j) const {
    return pixels[static_cast<std::size_t>(i) * cols + j];
  }
};

enum class Pool { TrainPool, TestPool };

struct RawMnist {
  std::vector<ByteImage> images;
  std::vector<int> labels;  // 0..9, one per image
  Pool source = Pool::TrainPool;
};

struct MnistData {
  RawMnist train;
  RawMnist test;
};

// IDX containers: big-endian u32 magic (0x00000803 images / 0x00000801
// labels), then counts, then raw bytes. Parsers are byte-faithful and reject
// wrong magic, truncation, trailing bytes, and labels outside 0..9.
std::vector<ByteImage> parse_idx_images(const std::vector<std::uint8_t>& bytes);
std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> write_idx_images(const std::vector<ByteImage>& images);
std::vector<std::uint8_t> write_idx_labels(const std::vector<int>& labels);

// Inflates gzip payloads (sniffed by the 0x1f 0x8b prefix), passes everything
// else through untouched.
std::vector<std::uint8_t> maybe_gunzip(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::string& path);

// pixel / 255.0, so bytes {0,255} map exactly to {0.0,1.0}
Matrix normalize(const ByteImage& img);

// Loads train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-
// ubyte, t10k-labels-idx1-ubyte from dir; a .gz variant is preferred when both
// exist. Missing files raise DataError naming the file.
MnistData load_mnist_dir(const std::string& dir);

struct SplitSpec {
  int train_size = 0;  // T
  int val_size = 0;
  int test_size = 0;
  std::uint64_t seed = 0;
};

struct BinarySplit {
  BinaryBatch train, val, test;
};

struct MulticlassSplit {
  MulticlassBatch train, val, test;
};

// Train and val are drawn disjointly from the train pool by seeded stratified
// sampling without replacement, balanced ceil(n/2) for digit_p (label 0) and
// floor(n/2) for digit_q (label 1). Test comes from the test pool filtered to
// the pair, shuffled, truncated to min(test_size, available).
BinarySplit make_binary_split(const RawMnist& raw_train, const RawMnist& raw_test,
                              int digit_p, int digit_q, const SplitSpec& spec);

// All ten classes; per-class train/val counts are size/10 with the remainder
// going to the lowest class indices. Test is the shuffled test pool truncated
// to min(test_size, available).
MulticlassSplit make_multiclass_split(const RawMnist& raw_train,
                                      const RawMnist& raw_test,
                                      const SplitSpec& spec);

}  // namespace bilinear

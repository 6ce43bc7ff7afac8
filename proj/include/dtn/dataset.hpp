#pragma once

// Image ingestion, feature extraction and the qubit feature map.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dtn/tensor_core.hpp"

namespace dtn {

// ---------------------------------------------------------------------------
// Qubit encoding

/// (sin(pi x / 2), cos(pi x / 2)) for x in [0, 1].
Eigen::Vector2d encode_feature(double x);

/// Rank-one projector onto encode_feature(x).
DensityMatrix feature_density(double x);

// ---------------------------------------------------------------------------
// Raw images

inline constexpr int kImageSide = 28;
inline constexpr int kImagePixels = kImageSide * kImageSide;

using Image = std::array<std::uint8_t, kImagePixels>;

enum class Split { train, validation, test };

struct RawDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  Split split = Split::train;
};

enum class IdxErrorKind { io, bad_magic, truncated, count_mismatch };

class IdxError : public Error {
 public:
  IdxError(IdxErrorKind kind, const std::string& what) : Error(ErrorKind::data, what), kind_(kind) {}
  IdxErrorKind idx_kind() const noexcept { return kind_; }

 private:
  IdxErrorKind kind_;
};

/// Reads a pair of IDX files (raw or gzip). Images must be 28x28.
RawDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
std::vector<Image> load_idx_images(const std::filesystem::path& path);
std::vector<int> load_idx_labels(const std::filesystem::path& path);

void write_idx_images(const std::filesystem::path& path, const std::vector<Image>& images);
void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// Feature extraction

/// Row weights of 1-D bilinear (triangle-kernel) resampling from `in` to `out`
/// samples with half-pixel centres. When shrinking, the kernel is widened by
/// in / out so every source pixel contributes (antialiased); each row sums to 1.
RMatrix resampling_weights(int in, int out);

/// Separable bilinear resampling to side x side, scaled to [0, 1].
RMatrix compress_image(const Image& img, int side = 8);

/// Principal-component projection fitted on a training set.
class Pca {
 public:
  /// Fits the top `components` directions; needs more samples than components.
  Pca(const std::vector<Image>& train, int components);

  int components() const { return static_cast<int>(basis_.cols()); }
  const RVector& mean() const { return mean_; }
  const RMatrix& basis() const { return basis_; }            // 784 x k, columns by decreasing variance
  const RVector& explained_variance() const { return variance_; }

  RVector project(const Image& img) const;                  // raw scores
  RVector project_mean_centred(const RVector& pixels) const;
  /// Scores min-max rescaled with the training extrema, clamped to [0, 1].
  RVector features(const Image& img) const;
  /// Mean squared reconstruction error over `images` using the first k components.
  double reconstruction_error(const std::vector<Image>& images, int k) const;

 private:
  RVector mean_;
  RMatrix basis_;
  RVector variance_;
  RVector min_, max_;
};

/// Per-sample PCA features of every split, fitted on the training split only.
std::vector<RVector> pca_features(const Pca& pca, const RawDataset& dataset);

// ---------------------------------------------------------------------------
// Class grouping

struct ClassGrouping {
  std::string name;
  std::array<int, 10> mapping{};  // original label -> {0, 1}; -1 drops the label

  static ClassGrouping even_odd();
  static ClassGrouping fashion();      // {0,2,3,6,9} -> 0, rest -> 1
  static ClassGrouping three_vs_five();  // 3 -> 0, 5 -> 1, others dropped
  static ClassGrouping identity();     // 0 -> 0, 1 -> 1, others dropped
  static ClassGrouping by_name(const std::string& name);

  bool keeps(int label) const { return label >= 0 && label < 10 && mapping[label] >= 0; }
  void validate() const;
};

std::vector<int> group_labels(const std::vector<int>& labels, const ClassGrouping& grouping);

// ---------------------------------------------------------------------------
// Encoded datasets

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EncodedSample {
  RVector features;
  int label = 0;

  /// Per-feature single-qubit states.
  std::vector<DensityMatrix> qubits() const;
};

struct EncodedDataset {
  FeatureMatrix features;  // samples x m, entries in [0, 1]
  std::vector<std::uint8_t> labels;

  Index size() const { return features.rows(); }
  int feature_count() const { return static_cast<int>(features.cols()); }
  EncodedSample sample(Index i) const { return {features.row(i).transpose(), labels[static_cast<std::size_t>(i)]}; }
  EncodedDataset subset(std::size_t count) const;
};

struct DatasetSplits {
  EncodedDataset train, validation, test;
};

/// Flat binary cache: "DTNML1", uint64 m, uint64 n, row-major float64 features,
/// then n uint8 labels. Little-endian.
void write_cache(const std::filesystem::path& path, const EncodedDataset& data);
EncodedDataset read_cache(const std::filesystem::path& path);

enum class FeatureKind { compressed8x8, pca8 };

struct PrepareOptions {
  std::string dataset = "mnist";  // mnist | fashion | kmnist
  std::string grouping = "even-odd";
  FeatureKind features = FeatureKind::compressed8x8;
  std::size_t train_size = 50040;
  std::size_t validation_size = 9960;
  std::optional<std::size_t> test_size;  // all matching test images when unset
  std::uint64_t seed = 1234;
};

/// Standard file names inside a data directory, e.g. <dir>/train-images-idx3-ubyte[.gz].
std::filesystem::path idx_file(const std::filesystem::path& dir, const std::string& stem);

/// Loads, filters by grouping, shuffles the training file (seeded), splits into
/// train / validation by position, encodes features.
DatasetSplits prepare_splits(const std::filesystem::path& data_dir, const PrepareOptions& options);

/// Defaults per named task: "mnist", "kmnist", "fashion", "mnist-3v5", "mnist-pca".
PrepareOptions task_options(const std::string& task);

}  // namespace dtn

#include "dtn/dataset.hpp"

#include "binary_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

namespace dtn {

Eigen::Vector2d encode_feature(double x) {
  if (!(x >= 0.0 && x <= 1.0)) config_error("feature value must lie in [0, 1]");
  const double angle = 0.5 * std::numbers::pi * x;
  return {std::sin(angle), std::cos(angle)};
}

DensityMatrix feature_density(double x) {
  const Eigen::Vector2d f = encode_feature(x);
  CMatrix rho(2, 2);
  rho(0, 0) = f(0) * f(0);
  rho(0, 1) = rho(1, 0) = f(0) * f(1);
  rho(1, 1) = f(1) * f(1);
  return DensityMatrix::unchecked(std::move(rho));
}

// ---------------------------------------------------------------------------
// IDX

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw IdxError(IdxErrorKind::io, "cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 16);
  for (;;) {
    const int n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      gzclose(f);
      throw IdxError(IdxErrorKind::io, "read error in " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + n);
  }
  gzclose(f);
  return out;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t offset, const std::filesystem::path& path) {
  if (buf.size() < offset + 4) throw IdxError(IdxErrorKind::truncated, "truncated IDX header in " + path.string());
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

}  // namespace

std::vector<Image> load_idx_images(const std::filesystem::path& path) {
  const auto buf = read_maybe_gzip(path);
  const std::uint32_t magic = read_be32(buf, 0, path);
  if (magic != kImageMagic) throw IdxError(IdxErrorKind::bad_magic, "bad IDX image magic in " + path.string());
  const std::uint32_t count = read_be32(buf, 4, path);
  const std::uint32_t rows = read_be32(buf, 8, path);
  const std::uint32_t cols = read_be32(buf, 12, path);
  if (rows != kImageSide || cols != kImageSide)
    throw IdxError(IdxErrorKind::bad_magic, "expected 28x28 images in " + path.string());
  const std::size_t need = 16 + std::size_t{count} * kImagePixels;
  if (buf.size() < need) throw IdxError(IdxErrorKind::truncated, "truncated IDX image data in " + path.string());
  std::vector<Image> images(count);
  for (std::size_t i = 0; i < count; ++i) std::memcpy(images[i].data(), buf.data() + 16 + i * kImagePixels, kImagePixels);
  return images;
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  const auto buf = read_maybe_gzip(path);
  const std::uint32_t magic = read_be32(buf, 0, path);
  if (magic != kLabelMagic) throw IdxError(IdxErrorKind::bad_magic, "bad IDX label magic in " + path.string());
  const std::uint32_t count = read_be32(buf, 4, path);
  if (buf.size() < 8 + std::size_t{count}) throw IdxError(IdxErrorKind::truncated, "truncated IDX labels in " + path.string());
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = buf[8 + i];
  return labels;
}

RawDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  RawDataset out;
  out.images = load_idx_images(images);
  out.labels = load_idx_labels(labels);
  if (out.images.size() != out.labels.size())
    throw IdxError(IdxErrorKind::count_mismatch, "image count " + std::to_string(out.images.size()) +
                                                     " does not match label count " + std::to_string(out.labels.size()));
  return out;
}

void write_idx_images(const std::filesystem::path& path, const std::vector<Image>& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError(IdxErrorKind::io, "cannot write " + path.string());
  put_be32(out, kImageMagic);
  put_be32(out, static_cast<std::uint32_t>(images.size()));
  put_be32(out, kImageSide);
  put_be32(out, kImageSide);
  for (const auto& img : images) out.write(reinterpret_cast<const char*>(img.data()), kImagePixels);
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError(IdxErrorKind::io, "cannot write " + path.string());
  put_be32(out, kLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) out.put(static_cast<char>(l));
}

// ---------------------------------------------------------------------------
// Compression and PCA

RMatrix resampling_weights(int in, int out) {
  if (in < 1 || out < 1) config_error("resampling sizes must be positive");
  const double inv_scale = static_cast<double>(in) / out;
  const double support = std::max(inv_scale, 1.0);  // triangle widened when shrinking
  RMatrix w = RMatrix::Zero(out, in);
  for (int o = 0; o < out; ++o) {
    const double centre = (o + 0.5) * inv_scale;
    for (int i = 0; i < in; ++i) w(o, i) = std::max(0.0, 1.0 - std::abs(i + 0.5 - centre) / support);
    w.row(o) /= w.row(o).sum();
  }
  return w;
}

RMatrix compress_image(const Image& img, int side) {
  if (side < 1) config_error("compressed side must be positive");
  const RMatrix w = resampling_weights(kImageSide, side);
  RMatrix pixels(kImageSide, kImageSide);
  for (int r = 0; r < kImageSide; ++r)
    for (int c = 0; c < kImageSide; ++c) pixels(r, c) = img[static_cast<std::size_t>(r * kImageSide + c)];
  return (w * pixels * w.transpose() / 255.0).cwiseMax(0.0).cwiseMin(1.0);
}

namespace {

RVector to_pixels(const Image& img) {
  RVector v(kImagePixels);
  for (int i = 0; i < kImagePixels; ++i) v(i) = img[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

Pca::Pca(const std::vector<Image>& train, int components) {
  const auto n = static_cast<Index>(train.size());
  if (components < 1 || components > kImagePixels) config_error("invalid PCA component count");
  if (n <= components) throw Error(ErrorKind::data, "PCA needs more samples than components");
  RMatrix x(n, kImagePixels);
  for (Index i = 0; i < n; ++i) x.row(i) = to_pixels(train[static_cast<std::size_t>(i)]).transpose();
  mean_ = x.colwise().mean().transpose();
  x.rowwise() -= mean_.transpose();
  const RMatrix cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<RMatrix> es(cov);
  if (es.info() != Eigen::Success) numerical_error("PCA eigensolver failed");
  // Eigen sorts ascending.
  basis_.resize(kImagePixels, components);
  variance_.resize(components);
  for (int c = 0; c < components; ++c) {
    const Index src = kImagePixels - 1 - c;
    basis_.col(c) = es.eigenvectors().col(src);
    variance_(c) = es.eigenvalues()(src);
  }
  if (variance_(components - 1) <= 0.0) throw Error(ErrorKind::data, "degenerate covariance for PCA");
  const RMatrix scores = x * basis_;
  min_ = scores.colwise().minCoeff().transpose();
  max_ = scores.colwise().maxCoeff().transpose();
}

RVector Pca::project_mean_centred(const RVector& pixels) const { return basis_.transpose() * (pixels - mean_); }

RVector Pca::project(const Image& img) const { return project_mean_centred(to_pixels(img)); }

RVector Pca::features(const Image& img) const {
  const RVector s = project(img);
  RVector out(s.size());
  for (Index c = 0; c < s.size(); ++c) {
    const double span = max_(c) - min_(c);
    out(c) = span > 0 ? std::clamp((s(c) - min_(c)) / span, 0.0, 1.0) : 0.0;
  }
  return out;
}

double Pca::reconstruction_error(const std::vector<Image>& images, int k) const {
  if (k < 0 || k > components()) config_error("reconstruction rank out of range");
  const RMatrix b = basis_.leftCols(k);
  double total = 0;
  for (const auto& img : images) {
    const RVector centred = to_pixels(img) - mean_;
    total += (centred - b * (b.transpose() * centred)).squaredNorm();
  }
  return total / (static_cast<double>(images.size()) * kImagePixels);
}

std::vector<RVector> pca_features(const Pca& pca, const RawDataset& dataset) {
  std::vector<RVector> out;
  out.reserve(dataset.images.size());
  for (const auto& img : dataset.images) out.push_back(pca.features(img));
  return out;
}

// ---------------------------------------------------------------------------
// Grouping

ClassGrouping ClassGrouping::even_odd() {
  ClassGrouping g{"even-odd", {}};
  for (int l = 0; l < 10; ++l) g.mapping[l] = l % 2;
  return g;
}

ClassGrouping ClassGrouping::fashion() {
  ClassGrouping g{"fashion", {}};
  g.mapping.fill(1);
  for (int l : {0, 2, 3, 6, 9}) g.mapping[l] = 0;
  return g;
}

ClassGrouping ClassGrouping::three_vs_five() {
  ClassGrouping g{"3v5", {}};
  g.mapping.fill(-1);
  g.mapping[3] = 0;
  g.mapping[5] = 1;
  return g;
}

ClassGrouping ClassGrouping::identity() {
  ClassGrouping g{"identity", {}};
  g.mapping.fill(-1);
  g.mapping[0] = 0;
  g.mapping[1] = 1;
  return g;
}

ClassGrouping ClassGrouping::by_name(const std::string& name) {
  if (name == "even-odd") return even_odd();
  if (name == "fashion") return fashion();
  if (name == "3v5") return three_vs_five();
  if (name == "identity") return identity();
  config_error("unknown class grouping '" + name + "'");
}

void ClassGrouping::validate() const {
  bool has0 = false, has1 = false;
  for (int v : mapping) {
    if (v < -1 || v > 1) config_error("grouping maps outside {0, 1}");
    has0 |= v == 0;
    has1 |= v == 1;
  }
  if (!has0 || !has1) config_error("grouping leaves a class empty");
}

std::vector<int> group_labels(const std::vector<int>& labels, const ClassGrouping& grouping) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    if (!grouping.keeps(l)) config_error("label " + std::to_string(l) + " is not covered by grouping " + grouping.name);
    out.push_back(grouping.mapping[l]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoded data

std::vector<DensityMatrix> EncodedSample::qubits() const {
  std::vector<DensityMatrix> out;
  out.reserve(static_cast<std::size_t>(features.size()));
  for (Index i = 0; i < features.size(); ++i) out.push_back(feature_density(features(i)));
  return out;
}

EncodedDataset EncodedDataset::subset(std::size_t count) const {
  const Index n = std::min<Index>(static_cast<Index>(count), size());
  EncodedDataset out;
  out.features = features.topRows(n);
  out.labels.assign(labels.begin(), labels.begin() + n);
  return out;
}

namespace {

constexpr char kCacheMagic[6] = {'D', 'T', 'N', 'M', 'L', '1'};

}  // namespace

using detail::get_le;
using detail::put_le;

void write_cache(const std::filesystem::path& path, const EncodedDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::data, "cannot write " + path.string());
  out.write(kCacheMagic, sizeof kCacheMagic);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(data.feature_count()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(data.size()));
  for (Index i = 0; i < data.size(); ++i)
    for (Index j = 0; j < data.features.cols(); ++j) put_le<double>(out, data.features(i, j));
  out.write(reinterpret_cast<const char*>(data.labels.data()), static_cast<std::streamsize>(data.labels.size()));
  if (!out) throw Error(ErrorKind::data, "write failed for " + path.string());
}

EncodedDataset read_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::data, "cannot open cache " + path.string());
  char magic[sizeof kCacheMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCacheMagic, sizeof magic) != 0)
    throw Error(ErrorKind::data, "bad cache magic in " + path.string());
  const auto m = get_le<std::uint64_t>(in, path);
  const auto n = get_le<std::uint64_t>(in, path);
  if (m == 0 || m > 4096 || n > (std::uint64_t{1} << 32)) throw Error(ErrorKind::data, "implausible cache header in " + path.string());
  EncodedDataset data;
  data.features.resize(static_cast<Index>(n), static_cast<Index>(m));
  for (Index i = 0; i < data.features.rows(); ++i)
    for (Index j = 0; j < data.features.cols(); ++j) data.features(i, j) = get_le<double>(in, path);
  data.labels.resize(n);
  if (!in.read(reinterpret_cast<char*>(data.labels.data()), static_cast<std::streamsize>(n)))
    throw Error(ErrorKind::data, "truncated cache labels in " + path.string());
  return data;
}

// ---------------------------------------------------------------------------
// Splits

std::filesystem::path idx_file(const std::filesystem::path& dir, const std::string& stem) {
  for (const auto& candidate : {dir / stem, dir / (stem + ".gz")})
    if (std::filesystem::exists(candidate)) return candidate;
  throw IdxError(IdxErrorKind::io, "missing " + (dir / stem).string() + "[.gz]");
}

namespace {

struct Filtered {
  std::vector<Image> images;
  std::vector<int> labels;  // grouped
};

Filtered filter(RawDataset raw, const ClassGrouping& grouping) {
  Filtered out;
  for (std::size_t i = 0; i < raw.images.size(); ++i)
    if (grouping.keeps(raw.labels[i])) {
      out.images.push_back(raw.images[i]);
      out.labels.push_back(grouping.mapping[raw.labels[i]]);
    }
  return out;
}

EncodedDataset encode(const std::vector<Image>& images, const std::vector<int>& labels, FeatureKind kind,
                      const Pca* pca) {
  const int m = kind == FeatureKind::compressed8x8 ? 64 : pca->components();
  EncodedDataset out;
  out.features.resize(static_cast<Index>(images.size()), m);
  out.labels.resize(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (kind == FeatureKind::compressed8x8) {
      const RMatrix grid = compress_image(images[i], 8);
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) out.features(static_cast<Index>(i), r * 8 + c) = grid(r, c);
    } else {
      out.features.row(static_cast<Index>(i)) = pca->features(images[i]).transpose();
    }
    out.labels[i] = static_cast<std::uint8_t>(labels[i]);
  }
  return out;
}

}  // namespace

DatasetSplits prepare_splits(const std::filesystem::path& data_dir, const PrepareOptions& options) {
  const auto grouping = ClassGrouping::by_name(options.grouping);
  grouping.validate();
  std::filesystem::path dir = data_dir / options.dataset;
  if (!std::filesystem::exists(dir)) dir = data_dir;

  auto train_raw = load_idx(idx_file(dir, "train-images-idx3-ubyte"), idx_file(dir, "train-labels-idx1-ubyte"));
  auto test_raw = load_idx(idx_file(dir, "t10k-images-idx3-ubyte"), idx_file(dir, "t10k-labels-idx1-ubyte"));
  Filtered train = filter(std::move(train_raw), grouping);
  Filtered test = filter(std::move(test_raw), grouping);

  const std::size_t need = options.train_size + options.validation_size;
  if (need > train.images.size())
    config_error("requested " + std::to_string(need) + " train+validation samples but only " +
                 std::to_string(train.images.size()) + " are available");

  std::vector<std::size_t> order(train.images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);

  Filtered tr, va;
  for (std::size_t i = 0; i < need; ++i) {
    Filtered& dst = i < options.train_size ? tr : va;
    dst.images.push_back(train.images[order[i]]);
    dst.labels.push_back(train.labels[order[i]]);
  }
  if (options.test_size && *options.test_size < test.images.size()) {
    test.images.resize(*options.test_size);
    test.labels.resize(*options.test_size);
  }

  std::optional<Pca> pca;
  if (options.features == FeatureKind::pca8) pca.emplace(tr.images, 8);
  const Pca* p = pca ? &*pca : nullptr;
  return {encode(tr.images, tr.labels, options.features, p), encode(va.images, va.labels, options.features, p),
          encode(test.images, test.labels, options.features, p)};
}

PrepareOptions task_options(const std::string& task) {
  PrepareOptions o;
  if (task == "mnist" || task == "kmnist") {
    o.dataset = task;
    o.grouping = "even-odd";
  } else if (task == "fashion") {
    o.dataset = "fashion";
    o.grouping = "fashion";
  } else if (task == "mnist-3v5") {
    o.dataset = "mnist";
    o.grouping = "3v5";
    o.train_size = 5000;
    o.validation_size = 2000;
  } else if (task == "mnist-pca") {
    o.dataset = "mnist";
    o.grouping = "even-odd";
    o.features = FeatureKind::pca8;
  } else {
    config_error("unknown task '" + task + "'");
  }
  return o;
}

}  // namespace dtn

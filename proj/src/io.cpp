#include "skm/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace skm {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot create " + path.string());
  return out;
}

std::uint64_t byte_size(const std::filesystem::path& path) {
  std::error_code ec;
  const auto n = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot stat " + path.string() + ": " + ec.message());
  return n;
}

template <typename T>
void read_exact(std::istream& in, T* dst, std::size_t count, const char* what) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * sizeof(T)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(T)) {
    throw Error(ErrorCode::kTruncatedFile, std::string("unexpected end of file in ") + what);
  }
}

template <typename T>
void write_raw(std::ostream& out, const T* src, std::size_t count) {
  out.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(count * sizeof(T)));
}

void check_finite_row(std::span<const float> row, std::size_t r) {
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (!std::isfinite(row[c])) {
      throw Error(ErrorCode::kNonFiniteValue, "non-finite value at row " + std::to_string(r), static_cast<std::int64_t>(r),
                  static_cast<std::int64_t>(c));
    }
  }
}

// Walks the record headers of an fvecs/ivecs file and returns (rows, dim).
std::pair<std::size_t, std::size_t> scan_records(std::istream& in, std::uint64_t size, const char* kind) {
  if (size == 0) throw Error(ErrorCode::kMalformedHeader, std::string("empty ") + kind + " file");
  std::int32_t dim = 0;
  std::uint64_t pos = 0;
  std::size_t rows = 0;
  while (pos < size) {
    if (size - pos < sizeof(std::int32_t)) {
      throw Error(ErrorCode::kTruncatedFile, "partial record header at row " + std::to_string(rows),
                  static_cast<std::int64_t>(rows));
    }
    in.seekg(static_cast<std::streamoff>(pos));
    std::int32_t d = 0;
    read_exact(in, &d, 1, kind);
    if (d <= 0) {
      throw Error(ErrorCode::kMalformedHeader, "non-positive dimension at row " + std::to_string(rows),
                  static_cast<std::int64_t>(rows));
    }
    if (rows == 0) {
      dim = d;
    } else if (d != dim) {
      throw Error(ErrorCode::kInconsistentDim,
                  "row " + std::to_string(rows) + " declares d = " + std::to_string(d) + ", expected " +
                      std::to_string(dim),
                  static_cast<std::int64_t>(rows));
    }
    const std::uint64_t record = sizeof(std::int32_t) + static_cast<std::uint64_t>(d) * 4;
    if (size - pos < record) {
      throw Error(ErrorCode::kTruncatedFile, "record " + std::to_string(rows) + " is truncated",
                  static_cast<std::int64_t>(rows));
    }
    pos += record;
    ++rows;
  }
  in.clear();
  in.seekg(0);
  return {rows, static_cast<std::size_t>(dim)};
}

VectorSet load_fvecs(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto [n, d] = scan_records(in, byte_size(path), "fvecs");
  FloatBuffer data(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    std::int32_t header = 0;
    read_exact(in, &header, 1, "fvecs");
    read_exact(in, data.data() + r * d, d, "fvecs");
    check_finite_row({data.data() + r * d, d}, r);
  }
  return VectorSet(n, d, std::move(data));
}

VectorSet load_fbin(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::uint64_t size = byte_size(path);
  if (size < 8) throw Error(ErrorCode::kMalformedHeader, "fbin header needs 8 bytes, file has " + std::to_string(size));
  std::uint32_t header[2] = {0, 0};
  read_exact(in, header, 2, "fbin header");
  const std::size_t n = header[0];
  const std::size_t d = header[1];
  if (n == 0 || d == 0) throw Error(ErrorCode::kMalformedHeader, "fbin header declares an empty matrix");
  const std::uint64_t expected = 8 + static_cast<std::uint64_t>(n) * d * 4;
  if (size < expected) {
    const std::uint64_t present = (size - 8) / 4;
    throw Error(ErrorCode::kTruncatedFile, "fbin header declares " + std::to_string(n * d) + " floats, file holds " +
                                               std::to_string(present),
                static_cast<std::int64_t>(present / d));
  }
  if (size > expected) {
    throw Error(ErrorCode::kMalformedHeader,
                "fbin file has " + std::to_string(size - expected) + " bytes beyond the declared matrix");
  }
  FloatBuffer data(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    read_exact(in, data.data() + r * d, d, "fbin");
    check_finite_row({data.data() + r * d, d}, r);
  }
  return VectorSet(n, d, std::move(data));
}

}  // namespace

VectorFormat parse_vector_format(const std::string& name) {
  if (name == "fvecs") return VectorFormat::kFvecs;
  if (name == "fbin") return VectorFormat::kFbin;
  throw Error(ErrorCode::kInvalidConfig, "unknown vector format '" + name + "' (expected fvecs or fbin)");
}

VectorFormat guess_vector_format(const std::filesystem::path& path) {
  return path.extension() == ".fvecs" ? VectorFormat::kFvecs : VectorFormat::kFbin;
}

VectorSet load_vectors(const std::filesystem::path& path, VectorFormat format) {
  return format == VectorFormat::kFvecs ? load_fvecs(path) : load_fbin(path);
}

void save_vectors(const std::filesystem::path& path, const VectorSet& x, VectorFormat format) {
  auto out = open_out(path);
  const std::size_t d = x.dim();
  if (format == VectorFormat::kFvecs) {
    const auto dim = static_cast<std::int32_t>(d);
    for (std::size_t r = 0; r < x.n_rows(); ++r) {
      write_raw(out, &dim, 1);
      write_raw(out, x.row(r).data(), d);
    }
  } else {
    const std::uint32_t header[2] = {static_cast<std::uint32_t>(x.n_rows()), static_cast<std::uint32_t>(d)};
    write_raw(out, header, 2);
    write_raw(out, x.data(), x.n_rows() * d);
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto [n, k] = scan_records(in, byte_size(path), "ivecs");
  GroundTruth gt;
  gt.n_queries = n;
  gt.k_gt = k;
  gt.ids.resize(n * k);
  std::vector<std::int32_t> row(k);
  for (std::size_t q = 0; q < n; ++q) {
    std::int32_t header = 0;
    read_exact(in, &header, 1, "ivecs");
    read_exact(in, row.data(), k, "ivecs");
    for (std::size_t j = 0; j < k; ++j) {
      if (row[j] < 0) throw Error(ErrorCode::kMalformedHeader, "negative id in ground truth", static_cast<std::int64_t>(q));
      gt.ids[q * k + j] = static_cast<std::uint32_t>(row[j]);
    }
  }
  return gt;
}

void save_ground_truth(const std::filesystem::path& path, const GroundTruth& gt) {
  auto out = open_out(path);
  const auto k = static_cast<std::int32_t>(gt.k_gt);
  for (std::size_t q = 0; q < gt.n_queries; ++q) {
    write_raw(out, &k, 1);
    write_raw(out, gt.ids.data() + q * gt.k_gt, gt.k_gt);
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t state) {
  for (const unsigned char b : bytes) {
    state ^= b;
    state *= 0x100000001b3ull;
  }
  return state;
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<unsigned char> buf(1 << 20);
  std::uint64_t h = 0xcbf29ce484222325ull;
  while (in) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    h = fnv1a64({buf.data(), static_cast<std::size_t>(in.gcount())}, h);
  }
  return h;
}

namespace {

constexpr char kModelMagic[4] = {'S', 'K', 'M', 'C'};

class ByteWriter {
 public:
  template <typename T>
  void put(const T* src, std::size_t count) {
    const auto* p = reinterpret_cast<const unsigned char*>(src);
    bytes_.insert(bytes_.end(), p, p + count * sizeof(T));
  }
  template <typename T>
  void put(T v) {
    put(&v, 1);
  }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> b) : bytes_(b) {}
  template <typename T>
  void get(T* dst, std::size_t count) {
    const std::size_t n = count * sizeof(T);
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::kTruncatedFile, "centroid file ends early");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T get() {
    T v{};
    get(&v, 1);
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_centroids(const std::filesystem::path& path, const CentroidModel& model) {
  const std::size_t k = model.centroids.n_rows();
  ByteWriter w;
  w.put(kModelMagic, 4);
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(k));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.centroids.dim()));
  w.put<std::uint64_t>(model.rotation_seed);
  w.put<std::uint32_t>(model.lists ? 1u : 0u);
  w.put(model.centroids.data(), k * model.centroids.dim());
  if (model.lists) {
    if (model.lists->k() != k) throw Error(ErrorCode::kDimensionMismatch, "cluster lists do not match k");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.lists->ids.size()));
    w.put(model.lists->offsets.data(), model.lists->offsets.size());
    w.put(model.lists->ids.data(), model.lists->ids.size());
  }
  const std::uint64_t checksum = fnv1a64(w.bytes());
  w.put(checksum);
  auto out = open_out(path);
  write_raw(out, w.bytes().data(), w.bytes().size());
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

CentroidModel load_centroids(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<unsigned char> bytes(byte_size(path));
  read_exact(in, bytes.data(), bytes.size(), "centroid file");
  ByteReader r(bytes);
  char magic[4];
  r.get(magic, 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0) throw Error(ErrorCode::kMalformedHeader, "not a centroid file");
  const auto version = r.get<std::uint32_t>();
  if (version != kModelVersion) {
    throw Error(ErrorCode::kVersionMismatch, "centroid file has format version " + std::to_string(version) +
                                                 ", this build reads version " + std::to_string(kModelVersion));
  }
  if (bytes.size() < 8) throw Error(ErrorCode::kTruncatedFile, "centroid file ends early");
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (fnv1a64({bytes.data(), body}) != stored) throw Error(ErrorCode::kChecksumMismatch, "centroid file is corrupted");

  ByteReader b(std::span<const unsigned char>(bytes).first(body));
  b.get(magic, 4);
  b.get<std::uint32_t>();
  const std::size_t k = b.get<std::uint32_t>();
  const std::size_t d = b.get<std::uint32_t>();
  CentroidModel model;
  model.rotation_seed = b.get<std::uint64_t>();
  const auto has_lists = b.get<std::uint32_t>();
  if (k == 0 || d == 0) throw Error(ErrorCode::kMalformedHeader, "centroid file declares an empty model");
  FloatBuffer values(k * d);
  b.get(values.data(), values.size());
  model.centroids = VectorSet(k, d, std::move(values));
  if (has_lists != 0) {
    ClusterLists lists;
    const std::size_t n_ids = b.get<std::uint32_t>();
    lists.offsets.resize(k + 1);
    b.get(lists.offsets.data(), k + 1);
    lists.ids.resize(n_ids);
    b.get(lists.ids.data(), n_ids);
    if (lists.offsets.front() != 0 || lists.offsets.back() != n_ids) {
      throw Error(ErrorCode::kMalformedHeader, "cluster list offsets are inconsistent");
    }
    model.lists = std::move(lists);
  }
  if (b.remaining() != 0) throw Error(ErrorCode::kMalformedHeader, "trailing bytes in centroid file");
  return model;
}

}  // namespace skm

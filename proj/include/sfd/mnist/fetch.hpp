#pragma once

#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfd/mnist/idx.hpp"

namespace sfd::mnist {

struct HttpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GzipError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CountMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OfflineCacheMissError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Transport seam so fetching is testable without a network.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// Returns the response body for GET <base>/<path>; throws HttpError.
  virtual std::vector<std::uint8_t> get(const std::string& base_url,
                                        const std::string& path) = 0;
};

/// One split of canonical MNIST.
struct MnistSet {
  std::uint32_t n = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> images;  // n * rows * cols
  std::vector<std::uint8_t> labels;  // n, values 0..9
};

struct MnistPair {
  MnistSet train;
  MnistSet test;
};

inline std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw GzipError("inflateInit2 failed");
  std::vector<std::uint8_t> out;
  out.resize(std::max<std::size_t>(in.size() * 4, 1 << 16));
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  std::size_t written = 0;
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    if (written == out.size()) out.resize(out.size() * 2);
    zs.next_out = out.data() + written;
    zs.avail_out = static_cast<uInt>(out.size() - written);
    rc = inflate(&zs, Z_NO_FLUSH);
    written = out.size() - zs.avail_out;
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw GzipError(std::string("inflate failed: ") + (zs.msg ? zs.msg : "corrupt stream"));
    }
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out > 0) {
      inflateEnd(&zs);
      throw GzipError("inflate failed: unexpected end of gzip stream");
    }
  }
  inflateEnd(&zs);
  out.resize(written);
  return out;
}

namespace detail {

inline const char* kFiles[4] = {
    "train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace detail

/// Downloads (or reads from <cache_dir>/mnist/) the four canonical gzipped
/// IDX files, decompresses, parses and verifies element counts. Offline mode
/// never touches the transport (the CLI wires an HttplibTransport; tests
/// inject fakes). expected_train/test exist so tests can run against small
/// synthetic corpora; the defaults are the canonical counts.
inline MnistPair fetch_mnist(const std::string& base_url, const std::string& cache_dir,
                             bool offline = false, HttpTransport* transport = nullptr,
                             std::uint32_t expected_train = 60000,
                             std::uint32_t expected_test = 10000) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(cache_dir) / "mnist";
  fs::create_directories(dir);

  auto fetch_one = [&](const char* name) -> std::vector<std::uint8_t> {
    const fs::path cached = dir / name;
    if (fs::exists(cached)) return detail::read_file(cached);
    if (offline)
      throw OfflineCacheMissError("offline mode and no cached copy of " +
                                  std::string(name) + " under " + dir.string());
    if (!transport)
      throw HttpError("no transport available to download " + std::string(name));
    std::vector<std::uint8_t> body = transport->get(base_url, name);
    detail::write_file(cached, body);
    return body;
  };

  auto load_split = [&](const char* images_gz, const char* labels_gz,
                        std::uint32_t expected_n) -> MnistSet {
    const IdxTensor images = parse_idx(gunzip(fetch_one(images_gz)));
    const IdxTensor labels = parse_idx(gunzip(fetch_one(labels_gz)));
    if (images.dims.size() != 3 || labels.dims.size() != 1)
      throw CountMismatchError("unexpected tensor ranks in MNIST files");
    if (images.dims[0] != expected_n || labels.dims[0] != expected_n)
      throw CountMismatchError("element count mismatch: images " +
                               std::to_string(images.dims[0]) + ", labels " +
                               std::to_string(labels.dims[0]) + ", expected " +
                               std::to_string(expected_n));
    MnistSet s;
    s.n = images.dims[0];
    s.rows = images.dims[1];
    s.cols = images.dims[2];
    s.images = images.data;
    s.labels = labels.data;
    return s;
  };

  MnistPair pair;
  pair.train = load_split(detail::kFiles[0], detail::kFiles[1], expected_train);
  pair.test = load_split(detail::kFiles[2], detail::kFiles[3], expected_test);
  return pair;
}

}  // namespace sfd::mnist

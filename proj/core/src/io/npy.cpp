#include "nodex/io/npy.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace nodex::io {

namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::string shape_tuple(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << shape[i];
    if (shape.size() == 1 || i + 1 < shape.size()) os << ",";
    if (i + 1 < shape.size()) os << " ";
  }
  os << ")";
  return os.str();
}

}  // namespace

void write_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
               const std::vector<Scalar>& data, bool as_float32) {
  std::size_t count = 1;
  for (std::size_t d : shape) count *= d;
  NODEX_CHECK(count == data.size(), "write_npy: shape does not match data size");

  std::string header = std::string("{'descr': '") + (as_float32 ? "<f4" : "<f8") +
                       "', 'fortran_order': False, 'shape': " + shape_tuple(shape) + ", }";
  // Pad so magic(6)+version(2)+len(2)+header is a multiple of 64, newline-terminated.
  std::size_t unpadded = 6 + 2 + 2 + header.size() + 1;
  std::size_t pad = (64 - unpadded % 64) % 64;
  header += std::string(pad, ' ');
  header += '\n';

  std::ofstream f(path, std::ios::binary);
  NODEX_REQUIRE(f.good(), "write_npy: cannot open " + path.string());
  f.write(kMagic, 6);
  f.put(static_cast<char>(1));
  f.put(static_cast<char>(0));
  std::uint16_t hlen = static_cast<std::uint16_t>(header.size());
  char lenbuf[2] = {static_cast<char>(hlen & 0xff), static_cast<char>(hlen >> 8)};
  f.write(lenbuf, 2);
  f.write(header.data(), static_cast<std::streamsize>(header.size()));
  if (as_float32) {
    std::vector<float> buf(data.begin(), data.end());
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  } else {
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  NODEX_REQUIRE(f.good(), "write_npy: short write to " + path.string());
}

NpyArray read_npy(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  NODEX_REQUIRE(f.good(), "read_npy: cannot open " + path.string());
  char magic[6];
  f.read(magic, 6);
  NODEX_REQUIRE(f.good() && std::memcmp(magic, kMagic, 6) == 0,
                "read_npy: bad magic in " + path.string());
  char ver[2];
  f.read(ver, 2);
  NODEX_REQUIRE(ver[0] == 1, "read_npy: unsupported npy version in " + path.string());
  char lenbuf[2];
  f.read(lenbuf, 2);
  std::size_t hlen = static_cast<unsigned char>(lenbuf[0]) |
                     (static_cast<std::size_t>(static_cast<unsigned char>(lenbuf[1])) << 8);
  std::string header(hlen, '\0');
  f.read(header.data(), static_cast<std::streamsize>(hlen));
  NODEX_REQUIRE(f.good(), "read_npy: truncated header in " + path.string());

  bool f4 = header.find("'<f4'") != std::string::npos;
  bool f8 = header.find("'<f8'") != std::string::npos;
  NODEX_REQUIRE(f4 || f8, "read_npy: unsupported dtype (want <f4 or <f8) in " + path.string());
  NODEX_REQUIRE(header.find("'fortran_order': False") != std::string::npos,
                "read_npy: fortran order unsupported in " + path.string());

  std::size_t lp = header.find('(');
  std::size_t rp = header.find(')', lp);
  NODEX_REQUIRE(lp != std::string::npos && rp != std::string::npos,
                "read_npy: malformed shape in " + path.string());
  NpyArray out;
  std::string inner = header.substr(lp + 1, rp - lp - 1);
  std::stringstream ss(inner);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::string trimmed;
    for (char c : tok)
      if (!std::isspace(static_cast<unsigned char>(c))) trimmed += c;
    if (!trimmed.empty()) out.shape.push_back(std::stoull(trimmed));
  }
  std::size_t count = 1;
  for (std::size_t d : out.shape) count *= d;
  out.data.resize(count);
  if (f4) {
    std::vector<float> buf(count);
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(count * sizeof(float)));
    NODEX_REQUIRE(f.good() || count == 0, "read_npy: truncated data in " + path.string());
    for (std::size_t i = 0; i < count; ++i) out.data[i] = static_cast<Scalar>(buf[i]);
  } else {
    f.read(reinterpret_cast<char*>(out.data.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
    NODEX_REQUIRE(f.good() || count == 0, "read_npy: truncated data in " + path.string());
  }
  return out;
}

void write_npy_matrix(const std::filesystem::path& path, const Matrix& m, bool as_float32) {
  std::vector<Scalar> data(static_cast<std::size_t>(m.rows() * m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  write_npy(path, {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, data,
            as_float32);
}

Matrix read_npy_matrix(const std::filesystem::path& path) {
  NpyArray a = read_npy(path);
  NODEX_REQUIRE(a.shape.size() == 2, "read_npy_matrix: expected 2D array in " + path.string());
  Matrix m(static_cast<Eigen::Index>(a.shape[0]), static_cast<Eigen::Index>(a.shape[1]));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = a.data[static_cast<std::size_t>(r * m.cols() + c)];
  return m;
}

}  // namespace nodex::io

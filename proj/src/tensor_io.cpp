#include "semfuse/tensor_io.hpp"

#include <cstring>
#include <fstream>

namespace semfuse {

namespace {

constexpr char kMagic[4] = {'S', 'F', 'T', 'F'};

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

std::string read_string(std::istream& in) {
  uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

}  // namespace

const Mat& TensorFile::mat(const std::string& name) const {
  auto it = mats.find(name);
  if (it == mats.end()) {
    throw DataError("tensor file: missing tensor '" + name + "'");
  }
  return it->second;
}

Vec TensorFile::vec(const std::string& name) const {
  const Mat& m = mat(name);
  if (m.cols() != 1) {
    throw DataError("tensor file: '" + name + "' is not a vector");
  }
  return m.col(0);
}

const std::vector<int64_t>& TensorFile::int_array(
    const std::string& name) const {
  auto it = ints.find(name);
  if (it == ints.end()) {
    throw DataError("tensor file: missing int array '" + name + "'");
  }
  return it->second;
}

void TensorFile::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write tensor file: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_string(out, meta.dump());
  write_u64(out, mats.size());
  for (const auto& [name, m] : mats) {
    write_string(out, name);
    write_u64(out, static_cast<uint64_t>(m.rows()));
    write_u64(out, static_cast<uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * m.size()));
  }
  write_u64(out, ints.size());
  for (const auto& [name, v] : ints) {
    write_string(out, name);
    write_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(sizeof(int64_t) * v.size()));
  }
  if (!out) throw DataError("short write on tensor file: " + path);
}

TensorFile TensorFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tensor file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("not a tensor file: " + path);
  }
  const uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw DataError("unsupported tensor file version " +
                    std::to_string(version) + " in " + path);
  }
  TensorFile f;
  try {
    f.meta = nlohmann::json::parse(read_string(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt tensor file metadata: " + std::string(e.what()));
  }
  const uint64_t n_mats = read_u64(in);
  for (uint64_t i = 0; i < n_mats; ++i) {
    std::string name = read_string(in);
    const uint64_t rows = read_u64(in);
    const uint64_t cols = read_u64(in);
    Mat m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    f.mats.emplace(std::move(name), std::move(m));
  }
  const uint64_t n_ints = read_u64(in);
  for (uint64_t i = 0; i < n_ints; ++i) {
    std::string name = read_string(in);
    const uint64_t n = read_u64(in);
    std::vector<int64_t> v(n);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(sizeof(int64_t) * n));
    f.ints.emplace(std::move(name), std::move(v));
  }
  if (!in) throw DataError("truncated tensor file: " + path);
  return f;
}

}  // namespace semfuse

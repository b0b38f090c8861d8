#include "hallab/archive.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hallab {
namespace {

constexpr char kMagic[4] = {'H', 'L', 'N', 'A'};
constexpr uint32_t kVersion = 1;

uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    case torch::kUInt8: return 3;
    default:
      throw std::invalid_argument("Archive: unsupported dtype");
  }
}

torch::ScalarType code_dtype(uint8_t c) {
  switch (c) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    case 3: return torch::kUInt8;
    default:
      throw std::runtime_error("Archive: bad dtype code");
  }
}

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("Archive: truncated file");
  return v;
}

void write_name(std::ostream& os, const std::string& s) {
  write_pod<uint32_t>(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_name(std::istream& is) {
  auto n = read_pod<uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("Archive: truncated name");
  return s;
}

}  // namespace

void Archive::put(const std::string& name, const torch::Tensor& t) {
  dtype_code(t.scalar_type());
  tensors_[name] = t.detach().contiguous().cpu().clone();
}

void Archive::put_string(const std::string& name, const std::string& value) {
  strings_[name] = value;
}

bool Archive::has(const std::string& name) const {
  return tensors_.count(name) > 0 || strings_.count(name) > 0;
}

torch::Tensor Archive::tensor(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw std::out_of_range("Archive: no tensor named '" + name + "'");
  }
  return it->second;
}

std::string Archive::str(const std::string& name) const {
  auto it = strings_.find(name);
  if (it == strings_.end()) {
    throw std::out_of_range("Archive: no string named '" + name + "'");
  }
  return it->second;
}

std::vector<std::string> Archive::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : tensors_) out.push_back(k);
  for (const auto& [k, _] : strings_) out.push_back(k);
  return out;
}

void Archive::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("Archive: cannot open for write: " + path);
  os.write(kMagic, 4);
  write_pod<uint32_t>(os, kVersion);
  write_pod<uint32_t>(os, static_cast<uint32_t>(tensors_.size()));
  write_pod<uint32_t>(os, static_cast<uint32_t>(strings_.size()));
  for (const auto& [name, t] : tensors_) {
    write_name(os, name);
    write_pod<uint8_t>(os, dtype_code(t.scalar_type()));
    write_pod<uint32_t>(os, static_cast<uint32_t>(t.dim()));
    for (int64_t d = 0; d < t.dim(); ++d) write_pod<int64_t>(os, t.size(d));
    const auto bytes = static_cast<uint64_t>(t.numel() * t.element_size());
    write_pod<uint64_t>(os, bytes);
    os.write(static_cast<const char*>(t.data_ptr()),
             static_cast<std::streamsize>(bytes));
  }
  for (const auto& [name, s] : strings_) {
    write_name(os, name);
    write_name(os, s);
  }
  if (!os) throw std::runtime_error("Archive: write failed: " + path);
}

Archive Archive::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("Archive: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("Archive: bad magic in " + path);
  }
  if (read_pod<uint32_t>(is) != kVersion) {
    throw std::runtime_error("Archive: unsupported version in " + path);
  }
  const auto n_tensors = read_pod<uint32_t>(is);
  const auto n_strings = read_pod<uint32_t>(is);
  Archive a;
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = read_name(is);
    const auto dtype = code_dtype(read_pod<uint8_t>(is));
    const auto ndim = read_pod<uint32_t>(is);
    std::vector<int64_t> shape(ndim);
    for (auto& d : shape) d = read_pod<int64_t>(is);
    const auto bytes = read_pod<uint64_t>(is);
    torch::Tensor t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
    if (static_cast<uint64_t>(t.numel() * t.element_size()) != bytes) {
      throw std::runtime_error("Archive: size mismatch for '" + name + "'");
    }
    is.read(static_cast<char*>(t.data_ptr()),
            static_cast<std::streamsize>(bytes));
    if (!is) throw std::runtime_error("Archive: truncated tensor '" + name + "'");
    a.tensors_[name] = t;
  }
  for (uint32_t i = 0; i < n_strings; ++i) {
    std::string name = read_name(is);
    a.strings_[name] = read_name(is);
  }
  return a;
}

}  // namespace hallab

#pragma once

#include <torch/torch.h>

#include <map>
#include <string>
#include <vector>

namespace hallab {

// Single-file archive of named numeric arrays plus string metadata.
// Supports float32/float64/int64/uint8 tensors; round-trips bit-exactly.
class Archive {
 public:
  void put(const std::string& name, const torch::Tensor& t);
  void put_string(const std::string& name, const std::string& value);

  bool has(const std::string& name) const;
  torch::Tensor tensor(const std::string& name) const;
  std::string str(const std::string& name) const;
  std::vector<std::string> names() const;

  void save(const std::string& path) const;
  static Archive load(const std::string& path);

 private:
  std::map<std::string, torch::Tensor> tensors_;
  std::map<std::string, std::string> strings_;
};

}  // namespace hallab

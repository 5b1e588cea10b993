#pragma once

#include <map>
#include <string>
#include <vector>

#include "hwm/nn.hpp"

namespace hwm {

// Named-tensor container for model weights. Serialized as JSON with explicit
// shapes; loading validates every shape against what the caller expects.
class Checkpoint {
 public:
  void put(const std::string& section, const std::string& name, const nn::Mat& m);
  void put(const std::string& section, const std::string& name, const nn::Vec& v);
  void put(const std::string& section, const std::string& name, const nn::Mlp& mlp);

  // Throw Error(ModelLoad) when the tensor is missing or the shape differs.
  nn::Mat get_mat(const std::string& section, const std::string& name,
                  size_t rows, size_t cols) const;
  nn::Vec get_vec(const std::string& section, const std::string& name, size_t n) const;
  nn::Mlp get_mlp(const std::string& section, const std::string& name,
                  const std::vector<size_t>& dims) const;

  bool has_section(const std::string& section) const;

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& text);

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;
  };
  const Tensor& find(const std::string& section, const std::string& name) const;

  std::map<std::string, std::map<std::string, Tensor>> sections_;
};

}  // namespace hwm

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uvrec/tensor.hpp"

namespace uvrec {

struct Param {
  std::string section;
  std::string name;
  Tensor value;
  Tensor grad;

  std::string full_name() const { return section + "." + name; }
};

// Named parameter tensors grouped into sections, one section per network.
// Tape leaves refer to parameters by index, so indices are stable.
class ModelParams {
 public:
  std::size_t add(const std::string& section, const std::string& name, Tensor value);

  std::size_t size() const { return params_.size(); }
  Param& at(std::size_t i) { return params_.at(i); }
  const Param& at(std::size_t i) const { return params_.at(i); }
  std::size_t index(std::string_view full_name) const;
  bool contains(std::string_view full_name) const;

  // Section names in insertion order.
  std::vector<std::string> sections() const;
  bool has_section(std::string_view section) const;
  std::vector<std::size_t> section_params(std::string_view section) const;
  std::size_t section_size(std::string_view section) const;

  std::vector<double> flatten(std::string_view section) const;
  void assign(std::string_view section, std::span<const double> values);

  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Param> params_;
};

}  // namespace uvrec

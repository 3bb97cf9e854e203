#include "uvrec/params.hpp"

#include <algorithm>
#include <stdexcept>

namespace uvrec {

std::size_t ModelParams::add(const std::string& section, const std::string& name,
                             Tensor value) {
  const std::string full = section + "." + name;
  if (contains(full)) throw std::invalid_argument("duplicate parameter '" + full + "'");
  Tensor grad(value.shape(), 0.0);
  params_.push_back(Param{section, name, std::move(value), std::move(grad)});
  return params_.size() - 1;
}

std::size_t ModelParams::index(std::string_view full_name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].full_name() == full_name) return i;
  }
  throw std::out_of_range("no parameter named '" + std::string(full_name) + "'");
}

bool ModelParams::contains(std::string_view full_name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Param& p) { return p.full_name() == full_name; });
}

std::vector<std::string> ModelParams::sections() const {
  std::vector<std::string> out;
  for (const auto& p : params_) {
    if (std::find(out.begin(), out.end(), p.section) == out.end()) out.push_back(p.section);
  }
  return out;
}

bool ModelParams::has_section(std::string_view section) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Param& p) { return p.section == section; });
}

std::vector<std::size_t> ModelParams::section_params(std::string_view section) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].section == section) out.push_back(i);
  }
  return out;
}

std::size_t ModelParams::section_size(std::string_view section) const {
  std::size_t n = 0;
  for (std::size_t i : section_params(section)) n += params_[i].value.size();
  return n;
}

std::vector<double> ModelParams::flatten(std::string_view section) const {
  std::vector<double> out;
  for (std::size_t i : section_params(section)) {
    const auto& v = params_[i].value.raw();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

void ModelParams::assign(std::string_view section, std::span<const double> values) {
  const std::size_t expected = section_size(section);
  if (values.size() != expected) {
    throw std::runtime_error("section '" + std::string(section) + "' expects " +
                             std::to_string(expected) + " values, got " +
                             std::to_string(values.size()));
  }
  std::size_t offset = 0;
  for (std::size_t i : section_params(section)) {
    auto& v = params_[i].value.raw();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), v.size(), v.begin());
    offset += v.size();
  }
}

void ModelParams::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

}  // namespace uvrec

#pragma once

#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vocl/core/error.hpp"

namespace vocl {

/// Named-dimension shape descriptor used for boundary checks. Layout is channel-last.
class TensorSpec {
 public:
  struct Dim {
    std::string name;
    int size;
  };

  TensorSpec() = default;
  TensorSpec(std::initializer_list<Dim> dims) : dims_(dims) { validate(); }
  explicit TensorSpec(std::vector<Dim> dims) : dims_(std::move(dims)) { validate(); }

  const std::vector<Dim>& dims() const { return dims_; }
  int rank() const { return static_cast<int>(dims_.size()); }

  const Dim* find(const std::string& name) const {
    for (const auto& d : dims_)
      if (d.name == name) return &d;
    return nullptr;
  }

  int size(const std::string& name) const {
    const Dim* d = find(name);
    if (!d) throw ShapeError("tensor " + str() + " has no dimension '" + name + "'");
    return d->size;
  }

  long long numel() const {
    long long n = 1;
    for (const auto& d : dims_) n *= d.size;
    return n;
  }

  /// Shared named dimensions must agree exactly.
  bool compatible(const TensorSpec& other) const {
    for (const auto& d : dims_)
      if (const Dim* o = other.find(d.name); o && o->size != d.size) return false;
    return true;
  }

  void require_compatible(const TensorSpec& other, const std::string& where) const {
    if (!compatible(other))
      throw ShapeError(where + ": shape " + str() + " incompatible with " + other.str());
  }

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? ", " : "") << dims_[i].name << '=' << dims_[i].size;
    os << ']';
    return os.str();
  }

  bool operator==(const TensorSpec& o) const {
    if (dims_.size() != o.dims_.size()) return false;
    for (std::size_t i = 0; i < dims_.size(); ++i)
      if (dims_[i].name != o.dims_[i].name || dims_[i].size != o.dims_[i].size) return false;
    return true;
  }

 private:
  void validate() const {
    for (const auto& d : dims_)
      if (d.size <= 0) throw ShapeError("dimension '" + d.name + "' must be positive, got " + std::to_string(d.size));
  }

  std::vector<Dim> dims_;
};

}  // namespace vocl

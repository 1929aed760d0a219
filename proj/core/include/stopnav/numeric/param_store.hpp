#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stopnav/numeric/array.hpp"

namespace stopnav::numeric {

/// Named gradient arrays, ordered by parameter name.
using Gradients = std::map<std::string, Array, std::less<>>;

/// Learnable parameters plus the two adaptive-moment accumulators per
/// parameter and the shared optimizer step counter.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Array value;
    Array first_moment;
    Array second_moment;
  };

  /// Registers a parameter; names must be unique. Returns its index.
  std::size_t add(std::string name, Array initial);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t parameter_count() const noexcept;

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // throws not_found

  Entry& entry(std::size_t i) { return entries_.at(i); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  Array& value(std::string_view name) { return entries_[index_of(name)].value; }
  const Array& value(std::string_view name) const { return entries_[index_of(name)].value; }

  const std::vector<Entry>& entries() const noexcept { return entries_; }

  std::uint64_t step() const noexcept { return step_; }
  void advance_step() noexcept { ++step_; }
  void set_step(std::uint64_t step) noexcept { step_ = step; }

  /// Zero-valued gradients shaped like every parameter.
  Gradients zero_gradients() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
};

inline bool operator==(const ParamStore::Entry& a, const ParamStore::Entry& b) {
  return a.name == b.name && a.value == b.value && a.first_moment == b.first_moment &&
         a.second_moment == b.second_moment;
}

}  // namespace stopnav::numeric

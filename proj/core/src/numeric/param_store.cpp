#include "stopnav/numeric/param_store.hpp"

#include "stopnav/error.hpp"

namespace stopnav::numeric {

std::size_t ParamStore::add(std::string name, Array initial) {
  if (index_.contains(name)) throw Error(ErrorCode::invalid_argument, "ParamStore: duplicate parameter '" + name + "'");
  if (initial.empty()) throw Error(ErrorCode::shape_mismatch, "ParamStore: parameter '" + name + "' is empty");
  const std::size_t i = entries_.size();
  Array zeros(initial.shape());
  index_.emplace(name, i);
  entries_.push_back(Entry{std::move(name), std::move(initial), zeros, zeros});
  return i;
}

std::size_t ParamStore::parameter_count() const noexcept {
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.value.size();
  return total;
}

std::optional<std::size_t> ParamStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw Error(ErrorCode::not_found, "ParamStore: no parameter named '" + std::string(name) + "'");
}

Gradients ParamStore::zero_gradients() const {
  Gradients out;
  for (const auto& e : entries_) out.emplace(e.name, Array(e.value.shape()));
  return out;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  return a.step_ == b.step_ && a.entries_ == b.entries_;
}

}  // namespace stopnav::numeric

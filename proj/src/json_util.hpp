#pragma once

#include "moco5d/common.hpp"

#include <fmt/format.h>
#include <initializer_list>
#include <json.hpp>
#include <string_view>

namespace moco5d::detail {

template <typename T>
void read_opt(nlohmann::json const &j, char const *key, T &out)
{
  if (j.contains(key)) { out = j.at(key).get<T>(); }
}

inline void reject_unknown_keys(nlohmann::json const &j, std::string_view what, std::initializer_list<std::string_view> keys)
{
  if (!j.is_object()) { throw DomainError(fmt::format("{}: expected a JSON object", what)); }
  for (auto const &[k, v] : j.items()) {
    bool known = false;
    for (auto key : keys) known = known || key == k;
    if (!known) { throw DomainError(fmt::format("{}: unknown key '{}'", what, k)); }
  }
}

} // namespace moco5d::detail

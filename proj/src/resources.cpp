#include "tcfd/resources.hpp"

#include "tcfd/error.hpp"

namespace tcfd::resources {

const std::string& get(const std::string& name) {
  const auto& table = builtin();
  const auto it = table.find(name);
  if (it == table.end()) throw Error(ErrorCode::NotFound, "no built-in resource " + name);
  return it->second;
}

}  // namespace tcfd::resources

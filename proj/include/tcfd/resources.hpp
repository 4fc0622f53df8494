#pragma once

#include <map>
#include <string>

namespace tcfd::resources {

/// Files under data/ compiled into the library, keyed by relative path
/// ("templates/qa.txt", "tcfd_data.json").
const std::map<std::string, std::string>& builtin();

const std::string& get(const std::string& name);

}  // namespace tcfd::resources

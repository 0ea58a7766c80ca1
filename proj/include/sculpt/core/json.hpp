// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

namespace sculpt {

/// JSON value that keeps object keys in insertion order.
using Json = nlohmann::ordered_json;

} // namespace sculpt

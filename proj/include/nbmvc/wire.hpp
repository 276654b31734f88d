#pragma once

#include "nbmvc/aslt.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace nbmvc {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kNbmSchema = "nbmvc/1";

Json scalar_to_json(const Scalar& value);
/// Throws ParseError on malformed input.
Scalar scalar_from_json(const Json& j);
Json meta_to_json(const MetaValue& value);
MetaValue meta_from_json(const Json& j);

Json node_to_json(const AsltNode& node);
AsltNode node_from_json(const Json& j);

Json change_to_json(const ChangeEvent& event);
ChangeEvent change_from_json(const Json& j);

Json tree_to_json(const AsltTree& tree);
AsltTree tree_from_json(const Json& j);

/// `.nbm` document: UTF-8 JSON, nodes in document order.
std::string serialize(const AsltTree& tree);
/// Throws UnsupportedVersion for unknown schemas, ParseError otherwise.
AsltTree deserialize(std::string_view bytes);

/// Reads a string field; throws ParseError naming `what` when absent.
std::string require_string(const Json& j, const char* field, std::string_view what);

} // namespace nbmvc

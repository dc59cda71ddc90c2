#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "logitest/errors.hpp"

namespace logitest {

enum class ParamLocation { path, query, header, body_field };
enum class SchemaType { string, integer, number, boolean, array, object };
enum class HttpMethod { GET, POST, PUT, PATCH, DELETE_ };

std::string_view to_string(ParamLocation loc);
std::string_view to_string(SchemaType type);
std::string_view to_string(HttpMethod method);

struct ParameterSpec {
  std::string name;
  ParamLocation location = ParamLocation::query;
  SchemaType schema_type = SchemaType::string;
  bool required = false;
  std::string description;
  std::optional<nlohmann::json> example;

  bool operator==(const ParameterSpec&) const = default;
};

struct ApiOperation {
  std::string id;  // operationId, or "METHOD path" when absent
  HttpMethod method = HttpMethod::GET;
  std::string path;  // URL template with {braced} variables
  std::string summary;
  std::string description;
  std::vector<ParameterSpec> parameters;
  bool request_body_present = false;
  // Body subtrees nested deeper than one object level, kept verbatim for
  // Markdown rendering instead of being flattened into parameter rows.
  std::vector<std::pair<std::string, nlohmann::json>> nested_body_schemas;
  std::map<std::string, std::string> response_specs;  // status pattern -> description

  bool operator==(const ApiOperation&) const = default;
};

struct ApiCatalog {
  std::string title;
  std::string base_path;
  std::vector<ApiOperation> operations;  // document order

  const ApiOperation* find(std::string_view id) const;

  bool operator==(const ApiCatalog&) const = default;
};

enum class SpecFormat { json, yaml, auto_detect };

// Parses an OpenAPI 3.x document (JSON or YAML) into a catalog. Unsupported
// constructs are skipped and noted in `warnings`; throws MalformedDocument
// when the text is not parseable at all and EmptySpec when no operation
// survives parsing.
ApiCatalog parse_spec(std::string_view document, SpecFormat format_hint = SpecFormat::auto_detect,
                      std::vector<std::string>* warnings = nullptr);

// Deterministic Markdown rendering of one operation: heading, summary and
// description, parameters table, request-body note, responses list.
std::string render_markdown(const ApiOperation& op);

// Canonical text fed to embedding and BM25 queries: summary, description,
// and parameter names/descriptions.
std::string description_text(const ApiOperation& op);

// Names of the {variables} in a path template, in order of appearance.
std::vector<std::string> path_template_variables(std::string_view path);

}  // namespace logitest

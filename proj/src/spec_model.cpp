#include "logitest/spec_model.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace logitest {

namespace {

using nlohmann::json;

void warn(std::vector<std::string>* warnings, std::string message) {
  if (warnings) warnings->push_back(std::move(message));
}

bool looks_like_integer(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

bool looks_like_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
      return nullptr;
    case YAML::NodeType::Scalar: {
      const std::string& raw = node.Scalar();
      if (node.Tag() == "!") return raw;  // explicitly quoted scalar
      if (raw == "null" || raw == "~" || raw == "Null" || raw == "NULL") return nullptr;
      if (raw == "true" || raw == "True") return true;
      if (raw == "false" || raw == "False") return false;
      if (looks_like_integer(raw)) {
        try {
          return std::stoll(raw);
        } catch (const std::exception&) {
          return raw;  // out of range; keep as text
        }
      }
      if (looks_like_number(raw)) return std::stod(raw);
      return raw;
    }
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (const auto& item : node) arr.push_back(yaml_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return obj;
    }
    default:
      return nullptr;
  }
}

json load_document(std::string_view document, SpecFormat hint) {
  std::string text(document);
  auto try_json = [&]() -> std::optional<json> {
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_discarded()) return std::nullopt;
    return parsed;
  };
  auto try_yaml = [&]() -> std::optional<json> {
    try {
      YAML::Node node = YAML::Load(text);
      if (!node.IsMap()) {
        // A bare scalar or sequence is not an OpenAPI document; YAML happily
        // parses arbitrary prose as a scalar, so reject it here.
        return std::nullopt;
      }
      return yaml_to_json(node);
    } catch (const YAML::Exception&) {
      return std::nullopt;
    }
  };

  std::optional<json> doc;
  switch (hint) {
    case SpecFormat::json:
      doc = try_json();
      break;
    case SpecFormat::yaml:
      doc = try_yaml();
      break;
    case SpecFormat::auto_detect:
      doc = try_json();
      if (!doc) doc = try_yaml();
      break;
  }
  if (!doc) throw MalformedDocument("document is not parseable as JSON or YAML");
  if (!doc->is_object()) throw MalformedDocument("document root is not an object");
  return *doc;
}

// Resolves "$ref": "#/a/b/c" within the same document. Returns the node
// itself when it is not a reference.
const json* resolve_ref(const json& doc, const json& node, std::vector<std::string>* warnings) {
  const json* current = &node;
  int hops = 0;
  while (current->is_object() && current->contains("$ref") && hops++ < 8) {
    const auto& ref = (*current)["$ref"];
    if (!ref.is_string()) return nullptr;
    std::string target = ref.get<std::string>();
    if (target.empty() || target[0] != '#') {
      warn(warnings, "skipped external $ref: " + target);
      return nullptr;
    }
    try {
      current = &doc.at(json::json_pointer(target.substr(1)));
    } catch (const json::exception&) {
      warn(warnings, "unresolvable $ref: " + target);
      return nullptr;
    }
  }
  return current;
}

std::optional<HttpMethod> method_from_key(const std::string& key) {
  std::string upper = key;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "GET") return HttpMethod::GET;
  if (upper == "POST") return HttpMethod::POST;
  if (upper == "PUT") return HttpMethod::PUT;
  if (upper == "PATCH") return HttpMethod::PATCH;
  if (upper == "DELETE") return HttpMethod::DELETE_;
  return std::nullopt;
}

SchemaType schema_type_from(const json& schema, std::vector<std::string>* warnings,
                            const std::string& context) {
  std::string type;
  if (schema.contains("type") && schema["type"].is_string()) type = schema["type"].get<std::string>();
  if (type.empty()) {
    if (schema.contains("properties")) return SchemaType::object;
    if (schema.contains("items")) return SchemaType::array;
    warn(warnings, context + ": schema without a type, treating as string");
    return SchemaType::string;
  }
  if (type == "string") return SchemaType::string;
  if (type == "integer") return SchemaType::integer;
  if (type == "number") return SchemaType::number;
  if (type == "boolean") return SchemaType::boolean;
  if (type == "array") return SchemaType::array;
  if (type == "object") return SchemaType::object;
  warn(warnings, context + ": unsupported schema type '" + type + "', treating as string");
  return SchemaType::string;
}

std::string string_field(const json& obj, const char* key) {
  if (obj.contains(key) && obj[key].is_string()) return obj[key].get<std::string>();
  return {};
}

std::optional<ParameterSpec> parse_parameter(const json& doc, const json& raw,
                                             std::vector<std::string>* warnings,
                                             const std::string& context) {
  const json* node = resolve_ref(doc, raw, warnings);
  if (!node || !node->is_object()) {
    warn(warnings, context + ": skipped unresolvable parameter");
    return std::nullopt;
  }
  ParameterSpec param;
  param.name = string_field(*node, "name");
  if (param.name.empty()) {
    warn(warnings, context + ": skipped parameter without a name");
    return std::nullopt;
  }
  std::string in = string_field(*node, "in");
  if (in == "path") {
    param.location = ParamLocation::path;
  } else if (in == "query") {
    param.location = ParamLocation::query;
  } else if (in == "header") {
    param.location = ParamLocation::header;
  } else {
    warn(warnings, context + ": skipped parameter '" + param.name + "' in unsupported location '" +
                       in + "'");
    return std::nullopt;
  }
  param.required = node->value("required", false);
  if (param.location == ParamLocation::path) param.required = true;
  param.description = string_field(*node, "description");
  if (node->contains("schema")) {
    const json* schema = resolve_ref(doc, (*node)["schema"], warnings);
    if (schema && schema->is_object()) {
      param.schema_type = schema_type_from(*schema, warnings, context + "/" + param.name);
      if (schema->contains("example")) param.example = (*schema)["example"];
    }
  }
  if (node->contains("example")) param.example = (*node)["example"];
  return param;
}

void parse_request_body(const json& doc, const json& raw, ApiOperation& op,
                        std::vector<std::string>* warnings, const std::string& context) {
  const json* body = resolve_ref(doc, raw, warnings);
  if (!body || !body->is_object()) return;
  op.request_body_present = true;
  if (!body->contains("content") || !(*body)["content"].is_object()) return;
  const json& content = (*body)["content"];
  const json* media = nullptr;
  if (content.contains("application/json")) {
    media = &content["application/json"];
  } else if (!content.empty()) {
    media = &content.begin().value();
    warn(warnings, context + ": no application/json body, using '" + content.begin().key() + "'");
  }
  if (!media || !media->is_object() || !media->contains("schema")) return;
  const json* schema = resolve_ref(doc, (*media)["schema"], warnings);
  if (!schema || !schema->is_object()) return;

  if (schema_type_from(*schema, nullptr, context) != SchemaType::object ||
      !schema->contains("properties")) {
    op.nested_body_schemas.emplace_back("(body)", *schema);
    return;
  }

  std::set<std::string> required_fields;
  if (schema->contains("required") && (*schema)["required"].is_array()) {
    for (const auto& r : (*schema)["required"])
      if (r.is_string()) required_fields.insert(r.get<std::string>());
  }

  auto add_field = [&](const std::string& name, const json& field_schema, bool required) {
    ParameterSpec param;
    param.name = name;
    param.location = ParamLocation::body_field;
    param.required = required;
    param.schema_type = schema_type_from(field_schema, warnings, context + "/" + name);
    param.description = string_field(field_schema, "description");
    if (field_schema.contains("example")) param.example = field_schema["example"];
    op.parameters.push_back(std::move(param));
  };

  for (const auto& [prop_name, prop_raw] : (*schema)["properties"].items()) {
    const json* prop = resolve_ref(doc, prop_raw, warnings);
    if (!prop || !prop->is_object()) continue;
    bool required = required_fields.count(prop_name) > 0;
    SchemaType type = schema_type_from(*prop, nullptr, context);
    if (type == SchemaType::object && prop->contains("properties")) {
      // Flatten one level of nesting into dotted rows; anything deeper is
      // kept verbatim for the Markdown rendering.
      for (const auto& [sub_name, sub_raw] : (*prop)["properties"].items()) {
        const json* sub = resolve_ref(doc, sub_raw, warnings);
        if (!sub || !sub->is_object()) continue;
        std::string dotted = prop_name + "." + sub_name;
        if (schema_type_from(*sub, nullptr, context) == SchemaType::object &&
            sub->contains("properties")) {
          op.nested_body_schemas.emplace_back(dotted, *sub);
          continue;
        }
        add_field(dotted, *sub, false);
      }
    } else {
      add_field(prop_name, *prop, required);
    }
  }
}

void parse_responses(const json& doc, const json& raw, ApiOperation& op,
                     std::vector<std::string>* warnings) {
  if (!raw.is_object()) return;
  for (const auto& [code, resp_raw] : raw.items()) {
    const json* resp = resolve_ref(doc, resp_raw, warnings);
    if (!resp || !resp->is_object()) continue;
    op.response_specs[code] = string_field(*resp, "description");
  }
}

// The set of {variables} in the path must equal the set of declared
// path-location parameters; synthesize missing ones and drop extras.
void reconcile_path_variables(ApiOperation& op, std::vector<std::string>* warnings) {
  auto vars = path_template_variables(op.path);
  std::set<std::string> var_set(vars.begin(), vars.end());
  std::set<std::string> declared;
  for (const auto& p : op.parameters)
    if (p.location == ParamLocation::path) declared.insert(p.name);

  std::erase_if(op.parameters, [&](const ParameterSpec& p) {
    if (p.location != ParamLocation::path || var_set.count(p.name)) return false;
    warn(warnings, op.id + ": dropped path parameter '" + p.name + "' not present in the template");
    return true;
  });
  for (const auto& var : vars) {
    if (declared.count(var)) continue;
    warn(warnings, op.id + ": synthesized undeclared path parameter '" + var + "'");
    ParameterSpec param;
    param.name = var;
    param.location = ParamLocation::path;
    param.schema_type = SchemaType::string;
    param.required = true;
    param.description = "(undeclared path parameter)";
    op.parameters.push_back(std::move(param));
  }
}

std::string markdown_cell(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '|')
      out += "\\|";
    else if (c == '\n')
      out += ' ';
    else
      out += c;
  }
  return out;
}

}  // namespace

std::string_view to_string(ParamLocation loc) {
  switch (loc) {
    case ParamLocation::path: return "path";
    case ParamLocation::query: return "query";
    case ParamLocation::header: return "header";
    case ParamLocation::body_field: return "body-field";
  }
  return "?";
}

std::string_view to_string(SchemaType type) {
  switch (type) {
    case SchemaType::string: return "string";
    case SchemaType::integer: return "integer";
    case SchemaType::number: return "number";
    case SchemaType::boolean: return "boolean";
    case SchemaType::array: return "array";
    case SchemaType::object: return "object";
  }
  return "?";
}

std::string_view to_string(HttpMethod method) {
  switch (method) {
    case HttpMethod::GET: return "GET";
    case HttpMethod::POST: return "POST";
    case HttpMethod::PUT: return "PUT";
    case HttpMethod::PATCH: return "PATCH";
    case HttpMethod::DELETE_: return "DELETE";
  }
  return "?";
}

const ApiOperation* ApiCatalog::find(std::string_view id) const {
  for (const auto& op : operations)
    if (op.id == id) return &op;
  return nullptr;
}

std::vector<std::string> path_template_variables(std::string_view path) {
  std::vector<std::string> vars;
  std::size_t pos = 0;
  while ((pos = path.find('{', pos)) != std::string_view::npos) {
    std::size_t end = path.find('}', pos);
    if (end == std::string_view::npos) break;
    vars.emplace_back(path.substr(pos + 1, end - pos - 1));
    pos = end + 1;
  }
  return vars;
}

ApiCatalog parse_spec(std::string_view document, SpecFormat format_hint,
                      std::vector<std::string>* warnings) {
  json doc = load_document(document, format_hint);

  ApiCatalog catalog;
  if (doc.contains("info") && doc["info"].is_object())
    catalog.title = string_field(doc["info"], "title");
  if (!doc.contains("openapi"))
    warn(warnings, "document does not declare an openapi 3.x version");
  if (doc.contains("servers") && doc["servers"].is_array() && !doc["servers"].empty()) {
    std::string url = string_field(doc["servers"][0], "url");
    auto scheme = url.find("://");
    auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start != std::string::npos) catalog.base_path = url.substr(path_start);
    if (catalog.base_path == "/") catalog.base_path.clear();
  }

  if (!doc.contains("paths") || !doc["paths"].is_object())
    throw EmptySpec("document has no paths table");

  std::set<std::string> used_ids;
  for (const auto& [path, item_raw] : doc["paths"].items()) {
    const json* item = resolve_ref(doc, item_raw, warnings);
    if (!item || !item->is_object()) {
      warn(warnings, "skipped unresolvable path item " + path);
      continue;
    }
    std::vector<ParameterSpec> shared_params;
    if (item->contains("parameters") && (*item)["parameters"].is_array()) {
      for (const auto& raw : (*item)["parameters"])
        if (auto p = parse_parameter(doc, raw, warnings, path)) shared_params.push_back(*p);
    }
    for (const auto& [key, op_raw] : item->items()) {
      if (key == "parameters" || key == "$ref" || key == "summary" || key == "description" ||
          key == "servers")
        continue;
      auto method = method_from_key(key);
      if (!method) {
        warn(warnings, "skipped unsupported method '" + key + "' on " + path);
        continue;
      }
      if (!op_raw.is_object()) continue;

      ApiOperation op;
      op.method = *method;
      op.path = path;
      std::string context = std::string(to_string(op.method)) + " " + path;
      op.id = string_field(op_raw, "operationId");
      if (op.id.empty() || used_ids.count(op.id)) {
        if (!op.id.empty())
          warn(warnings, context + ": duplicate operationId '" + op.id + "', using derived id");
        op.id = context;
      }
      if (used_ids.count(op.id)) {
        warn(warnings, "skipped duplicate operation " + op.id);
        continue;
      }
      op.summary = string_field(op_raw, "summary");
      op.description = string_field(op_raw, "description");

      op.parameters = shared_params;
      if (op_raw.contains("parameters") && op_raw["parameters"].is_array()) {
        for (const auto& raw : op_raw["parameters"]) {
          auto p = parse_parameter(doc, raw, warnings, context);
          if (!p) continue;
          std::erase_if(op.parameters, [&](const ParameterSpec& existing) {
            return existing.name == p->name && existing.location == p->location;
          });
          op.parameters.push_back(*p);
        }
      }
      if (op_raw.contains("requestBody"))
        parse_request_body(doc, op_raw["requestBody"], op, warnings, context);
      if (op_raw.contains("responses")) parse_responses(doc, op_raw["responses"], op, warnings);

      reconcile_path_variables(op, warnings);
      used_ids.insert(op.id);
      catalog.operations.push_back(std::move(op));
    }
  }

  if (catalog.operations.empty()) throw EmptySpec("no operation could be parsed from the document");
  return catalog;
}

std::string render_markdown(const ApiOperation& op) {
  std::ostringstream out;
  out << "## " << to_string(op.method) << " " << op.path << "\n";
  if (!op.summary.empty()) out << op.summary << "\n";
  if (!op.description.empty()) out << op.description << "\n";
  out << "\n";

  if (op.parameters.empty()) {
    out << "Parameters: none\n";
  } else {
    out << "Parameters:\n\n";
    out << "| name | location | type | required | description |\n";
    out << "|---|---|---|---|---|\n";
    for (const auto& p : op.parameters) {
      std::string desc = p.description;
      if (p.example) {
        if (!desc.empty()) desc += " ";
        desc += "Example: " + p.example->dump();
      }
      out << "| " << markdown_cell(p.name) << " | " << to_string(p.location) << " | "
          << to_string(p.schema_type) << " | " << (p.required ? "yes" : "no") << " | "
          << markdown_cell(desc) << " |\n";
    }
  }
  out << "\n";

  if (op.request_body_present) {
    out << "Request body: JSON document; body fields are listed in the parameters table as "
           "body-field rows.\n";
    for (const auto& [name, schema] : op.nested_body_schemas)
      out << "Nested schema at `" << name << "`:\n```json\n" << schema.dump(2) << "\n```\n";
  } else {
    out << "Request body: none\n";
  }
  out << "\n";

  if (op.response_specs.empty()) {
    out << "Responses: undocumented\n";
  } else {
    out << "Responses:\n";
    for (const auto& [code, desc] : op.response_specs) {
      out << "- " << code;
      if (!desc.empty()) out << ": " << desc;
      out << "\n";
    }
  }
  return out.str();
}

std::string description_text(const ApiOperation& op) {
  std::string out;
  auto append = [&](std::string_view part) {
    if (part.empty()) return;
    if (!out.empty()) out += "\n";
    out += part;
  };
  append(op.summary);
  append(op.description);
  for (const auto& p : op.parameters) {
    if (p.description.empty())
      append(p.name);
    else
      append(p.name + ": " + p.description);
  }
  return out;
}

}  // namespace logitest

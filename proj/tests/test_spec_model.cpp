#include <doctest.h>

#include <fstream>
#include <sstream>

#include "logitest/errors.hpp"
#include "logitest/fixture_service.hpp"
#include "logitest/spec_model.hpp"

using namespace logitest;
using nlohmann::json;

namespace {

std::string read_repo_file(const std::string& relative) {
  std::ifstream file(std::string(LOGITEST_REPO_DIR) + "/" + relative, std::ios::binary);
  REQUIRE(file);
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

const char* kMinimalSpec = R"({
  "openapi": "3.0.3",
  "info": {"title": "Ping", "version": "1"},
  "paths": {"/ping": {"get": {"summary": "Ping", "responses": {"200": {"description": "pong"}}}}}
})";

}  // namespace

TEST_CASE("minimal document yields one operation with no parameters") {
  ApiCatalog catalog = parse_spec(kMinimalSpec);
  REQUIRE(catalog.operations.size() == 1);
  const ApiOperation& op = catalog.operations[0];
  CHECK(op.id == "GET /ping");
  CHECK(op.method == HttpMethod::GET);
  CHECK(op.path == "/ping");
  CHECK(op.parameters.empty());
  CHECK(op.response_specs.at("200") == "pong");
}

TEST_CASE("fixture petstore document parses into nine operations") {
  std::vector<std::string> warnings;
  ApiCatalog catalog = parse_spec(fixture_openapi_document(), SpecFormat::auto_detect, &warnings);
  CHECK(catalog.operations.size() == 9);
  CHECK(catalog.title == "Petstore Fixture");
  CHECK(catalog.find("POST /pet") != nullptr);
  CHECK(catalog.find("GET /pet/{petId}") != nullptr);
  CHECK(catalog.find("GET /user/login") != nullptr);
  CHECK(warnings.empty());

  SUBCASE("path-variable closure holds on the whole catalog") {
    for (const auto& op : catalog.operations) {
      auto vars = path_template_variables(op.path);
      std::size_t declared = 0;
      for (const auto& p : op.parameters)
        if (p.location == ParamLocation::path) {
          ++declared;
          CHECK(std::find(vars.begin(), vars.end(), p.name) != vars.end());
          CHECK(p.required);
        }
      CHECK(declared == vars.size());
    }
  }

  SUBCASE("request bodies were flattened into body-field parameters") {
    const ApiOperation* post_pet = catalog.find("POST /pet");
    auto has_param = [&](const std::string& name, ParamLocation location) {
      for (const auto& p : post_pet->parameters)
        if (p.name == name && p.location == location) return true;
      return false;
    };
    CHECK(has_param("name", ParamLocation::body_field));
    CHECK(has_param("photoUrls", ParamLocation::body_field));
    CHECK(has_param("status", ParamLocation::body_field));
    CHECK(has_param("category.id", ParamLocation::body_field));
    CHECK(has_param("category.name", ParamLocation::body_field));
    CHECK(post_pet->request_body_present);
  }

  SUBCASE("required flags follow the schema") {
    const ApiOperation* post_pet = catalog.find("POST /pet");
    for (const auto& p : post_pet->parameters) {
      if (p.name == "name" || p.name == "photoUrls")
        CHECK(p.required);
      else
        CHECK_FALSE(p.required);
    }
  }
}

TEST_CASE("yaml and json forms of a document parse identically") {
  const char* yaml_doc = R"(openapi: 3.0.3
info:
  title: Ping
  version: "1"
paths:
  /ping:
    get:
      summary: Ping
      responses:
        "200":
          description: pong
)";
  ApiCatalog from_yaml = parse_spec(yaml_doc, SpecFormat::yaml);
  ApiCatalog from_json = parse_spec(kMinimalSpec, SpecFormat::json);
  CHECK(from_yaml == from_json);

  SUBCASE("auto detection accepts both") {
    CHECK(parse_spec(yaml_doc) == from_yaml);
    CHECK(parse_spec(kMinimalSpec) == from_json);
  }
}

TEST_CASE("parse_spec is deterministic") {
  std::string doc = fixture_openapi_document();
  CHECK(parse_spec(doc) == parse_spec(doc));
}

TEST_CASE("document without a paths table is EmptySpec") {
  CHECK_THROWS_AS(parse_spec("not-a-spec:"), EmptySpec);
  CHECK_THROWS_AS(parse_spec(R"({"openapi": "3.0.3", "paths": {}})"), EmptySpec);
}

TEST_CASE("unparseable document is MalformedDocument") {
  CHECK_THROWS_AS(parse_spec("{\"unterminated\": ["), MalformedDocument);
  CHECK_THROWS_AS(parse_spec("[1, 2, 3]"), MalformedDocument);
}

TEST_CASE("operationId wins over the derived id, duplicates fall back") {
  const char* doc = R"({
    "openapi": "3.0.3",
    "paths": {
      "/a": {"get": {"operationId": "readA", "responses": {}}},
      "/b": {"get": {"operationId": "readA", "responses": {}}}
    }
  })";
  std::vector<std::string> warnings;
  ApiCatalog catalog = parse_spec(doc, SpecFormat::json, &warnings);
  REQUIRE(catalog.operations.size() == 2);
  CHECK(catalog.operations[0].id == "readA");
  CHECK(catalog.operations[1].id == "GET /b");
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("undeclared path variables are synthesized as required path parameters") {
  const char* doc = R"({
    "openapi": "3.0.3",
    "paths": {"/pet/{petId}/photo/{photoId}": {"get": {
      "parameters": [{"name": "petId", "in": "path", "required": true,
                      "schema": {"type": "integer"}}],
      "responses": {}
    }}}
  })";
  std::vector<std::string> warnings;
  ApiCatalog catalog = parse_spec(doc, SpecFormat::json, &warnings);
  const ApiOperation& op = catalog.operations[0];
  REQUIRE(op.parameters.size() == 2);
  CHECK(op.parameters[1].name == "photoId");
  CHECK(op.parameters[1].location == ParamLocation::path);
  CHECK(op.parameters[1].required);
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("path parameters that are not in the template are dropped") {
  const char* doc = R"({
    "openapi": "3.0.3",
    "paths": {"/pet": {"get": {
      "parameters": [{"name": "ghost", "in": "path", "schema": {"type": "string"}}],
      "responses": {}
    }}}
  })";
  std::vector<std::string> warnings;
  ApiCatalog catalog = parse_spec(doc, SpecFormat::json, &warnings);
  CHECK(catalog.operations[0].parameters.empty());
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("path-level parameters are shared and can be overridden") {
  const char* doc = R"({
    "openapi": "3.0.3",
    "paths": {"/pet/{petId}": {
      "parameters": [{"name": "petId", "in": "path", "required": true,
                      "description": "shared", "schema": {"type": "integer"}}],
      "get": {"responses": {}},
      "delete": {
        "parameters": [{"name": "petId", "in": "path", "required": true,
                        "description": "override", "schema": {"type": "integer"}}],
        "responses": {}
      }
    }}
  })";
  ApiCatalog catalog = parse_spec(doc, SpecFormat::json);
  const ApiOperation* get = catalog.find("GET /pet/{petId}");
  const ApiOperation* del = catalog.find("DELETE /pet/{petId}");
  REQUIRE(get);
  REQUIRE(del);
  CHECK(get->parameters[0].description == "shared");
  CHECK(del->parameters[0].description == "override");
}

TEST_CASE("intra-document refs resolve for parameters and bodies") {
  const char* doc = R"({
    "openapi": "3.0.3",
    "paths": {"/thing": {"post": {
      "requestBody": {"$ref": "#/components/requestBodies/Thing"},
      "responses": {}
    }}},
    "components": {
      "requestBodies": {"Thing": {"content": {"application/json": {
        "schema": {"$ref": "#/components/schemas/Thing"}}}}},
      "schemas": {"Thing": {"type": "object", "required": ["label"],
        "properties": {"label": {"type": "string", "description": "display label"}}}}
    }
  })";
  ApiCatalog catalog = parse_spec(doc, SpecFormat::json);
  const ApiOperation& op = catalog.operations[0];
  CHECK(op.request_body_present);
  REQUIRE(op.parameters.size() == 1);
  CHECK(op.parameters[0].name == "label");
  CHECK(op.parameters[0].location == ParamLocation::body_field);
  CHECK(op.parameters[0].required);
  CHECK(op.parameters[0].description == "display label");
}

TEST_CASE("unresolvable and external refs are skipped with warnings") {
  const char* doc = R"({
    "openapi": "3.0.3",
    "paths": {"/a": {"get": {
      "parameters": [{"$ref": "#/components/parameters/Missing"},
                     {"$ref": "other.json#/params/X"},
                     {"name": "ok", "in": "query", "schema": {"type": "string"}}],
      "responses": {}
    }}}
  })";
  std::vector<std::string> warnings;
  ApiCatalog catalog = parse_spec(doc, SpecFormat::json, &warnings);
  REQUIRE(catalog.operations[0].parameters.size() == 1);
  CHECK(catalog.operations[0].parameters[0].name == "ok");
  CHECK(warnings.size() >= 2);
}

TEST_CASE("unsupported methods and parameter locations are skipped, not fatal") {
  const char* doc = R"({
    "openapi": "3.0.3",
    "paths": {"/a": {
      "head": {"responses": {}},
      "get": {"parameters": [{"name": "c", "in": "cookie", "schema": {"type": "string"}}],
              "responses": {}}
    }}
  })";
  std::vector<std::string> warnings;
  ApiCatalog catalog = parse_spec(doc, SpecFormat::json, &warnings);
  CHECK(catalog.operations.size() == 1);
  CHECK(catalog.operations[0].parameters.empty());
  CHECK(warnings.size() >= 2);
}

TEST_CASE("deeply nested body objects stay out of the parameter table") {
  const char* doc = R"({
    "openapi": "3.0.3",
    "paths": {"/a": {"post": {
      "requestBody": {"content": {"application/json": {"schema": {
        "type": "object",
        "properties": {
          "flat": {"type": "string"},
          "nest": {"type": "object", "properties": {
            "leaf": {"type": "integer"},
            "deep": {"type": "object", "properties": {"core": {"type": "boolean"}}}
          }}
        }
      }}}},
      "responses": {}
    }}}
  })";
  ApiCatalog catalog = parse_spec(doc, SpecFormat::json);
  const ApiOperation& op = catalog.operations[0];
  std::vector<std::string> names;
  for (const auto& p : op.parameters) names.push_back(p.name);
  CHECK(std::find(names.begin(), names.end(), "flat") != names.end());
  CHECK(std::find(names.begin(), names.end(), "nest.leaf") != names.end());
  CHECK(std::find(names.begin(), names.end(), "nest.deep") == names.end());
  REQUIRE(op.nested_body_schemas.size() == 1);
  CHECK(op.nested_body_schemas[0].first == "nest.deep");
  CHECK(render_markdown(op).find("nest.deep") != std::string::npos);
}

TEST_CASE("markdown for a parameterless operation says so literally") {
  ApiCatalog catalog = parse_spec(kMinimalSpec);
  std::string markdown = render_markdown(catalog.operations[0]);
  CHECK(markdown.rfind("## GET /ping\n", 0) == 0);
  CHECK(markdown.find("Parameters: none\n") != std::string::npos);
  CHECK(markdown.find("Request body: none") != std::string::npos);
}

TEST_CASE("markdown is deterministic and lists parameter rows") {
  ApiCatalog catalog = parse_spec(fixture_openapi_document());
  const ApiOperation* post_pet = catalog.find("POST /pet");
  std::string markdown = render_markdown(*post_pet);
  CHECK(markdown == render_markdown(*post_pet));
  CHECK(markdown.find("| name |") != std::string::npos);
  CHECK(markdown.find("| photoUrls |") != std::string::npos);
  CHECK(markdown.find("| status |") != std::string::npos);
  CHECK(markdown.find("Responses:") != std::string::npos);
  CHECK(markdown.find("- 201: Pet created") != std::string::npos);
}

TEST_CASE("markdown of fixture POST /pet matches the reviewed golden file") {
  ApiCatalog catalog = parse_spec(fixture_openapi_document());
  std::string golden = read_repo_file("tests/golden/post_pet_markdown.md");
  CHECK(render_markdown(*catalog.find("POST /pet")) == golden);
}

TEST_CASE("description_text concatenates summary, description, and parameter text") {
  ApiOperation op;
  op.summary = "Add a new pet";
  CHECK(description_text(op).rfind("Add a new pet", 0) == 0);

  SUBCASE("parameter-only operations still get text") {
    ApiOperation bare;
    ParameterSpec id;
    id.name = "id";
    id.location = ParamLocation::query;
    bare.parameters.push_back(id);
    CHECK(description_text(bare) == "id");
  }

  SUBCASE("parameter descriptions ride along") {
    ParameterSpec status;
    status.name = "status";
    status.location = ParamLocation::query;
    status.description = "filter value";
    op.parameters.push_back(status);
    CHECK(description_text(op) == "Add a new pet\nstatus: filter value");
  }

  SUBCASE("fixture POST /order mentions its resource") {
    ApiCatalog catalog = parse_spec(fixture_openapi_document());
    std::string text = description_text(*catalog.find("POST /order"));
    CHECK(text.find("order") != std::string::npos);
  }
}

TEST_CASE("path_template_variables extracts braced names in order") {
  CHECK(path_template_variables("/pet/{petId}/photo/{photoId}") ==
        std::vector<std::string>{"petId", "photoId"});
  CHECK(path_template_variables("/plain").empty());
}

TEST_CASE("base path comes from the first server url") {
  const char* doc = R"({
    "openapi": "3.0.3",
    "servers": [{"url": "https://x.example/api/v3"}],
    "paths": {"/ping": {"get": {"responses": {}}}}
  })";
  CHECK(parse_spec(doc, SpecFormat::json).base_path == "/api/v3");
}

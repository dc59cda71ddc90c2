#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "logitest/errors.hpp"
#include "logitest/fixture_service.hpp"
#include "logitest/httplib_shim.hpp"
#include "logitest/spec_model.hpp"

using namespace logitest;
using nlohmann::json;

namespace {

std::string read_repo_file(const std::string& relative) {
  auto path = std::filesystem::path(LOGITEST_REPO_DIR) / relative;
  std::ifstream file(path, std::ios::binary);
  REQUIRE_MESSAGE(bool(file), "missing repo file ", path.string());
  std::ostringstream out;
  out << file.rdbuf();
  return out.str();
}

struct RunningFixture {
  explicit RunningFixture(FixtureBugs bugs = {}, bool seed = true) : service(bugs, seed) {
    service.start(0);
    client = std::make_unique<httplib::Client>(service.base_url());
  }

  json get_json(const httplib::Result& result) { return json::parse(result->body); }

  FixtureService service;
  std::unique_ptr<httplib::Client> client;
};

const std::string kValidPet = R"({"name": "Bella", "photoUrls": ["https://pets.example/b.jpg"]})";

}  // namespace

TEST_CASE("bug toggles parse from comma lists") {
  auto both = FixtureBugs::from_csv("B1,B3");
  CHECK(both.b1);
  CHECK_FALSE(both.b2);
  CHECK(both.b3);
  CHECK_FALSE(both.b4);

  auto spaced = FixtureBugs::from_csv(" b2 , B4 ");
  CHECK_FALSE(spaced.b1);
  CHECK(spaced.b2);
  CHECK_FALSE(spaced.b3);
  CHECK(spaced.b4);

  auto none = FixtureBugs::from_csv("");
  CHECK_FALSE(none.b1);
  CHECK_FALSE(none.b2);
  CHECK_FALSE(none.b3);
  CHECK_FALSE(none.b4);

  CHECK_THROWS_WITH_AS(FixtureBugs::from_csv("B9"), doctest::Contains("B9"), FatalSetup);
}

TEST_CASE("the seed data contains exactly pet 7") {
  RunningFixture fixture;
  CHECK(fixture.service.pet_count() == 1);
  CHECK(fixture.service.order_count() == 0);
  CHECK(fixture.service.user_count() == 0);

  auto result = fixture.client->Get("/pet/7");
  REQUIRE(result);
  CHECK(result->status == 200);
  auto pet = fixture.get_json(result);
  CHECK(pet["id"] == 7);
  CHECK(pet["name"] == "Rex");
  CHECK(pet["category"]["name"] == "dogs");

  auto missing = fixture.client->Get("/pet/999");
  CHECK(missing->status == 404);
  CHECK(fixture.get_json(missing)["message"] == "pet not found");
}

TEST_CASE("pet creation answers 200 with the bug and 201 without") {
  RunningFixture buggy;
  auto result = buggy.client->Post("/pet", kValidPet, "application/json");
  REQUIRE(result);
  CHECK(result->status == 200);
  CHECK(buggy.get_json(result)["id"] == 8);
  CHECK(buggy.service.pet_count() == 2);

  RunningFixture fixed(FixtureBugs::none());
  auto fixed_result = fixed.client->Post("/pet", kValidPet, "application/json");
  CHECK(fixed_result->status == 201);
  CHECK(fixed.get_json(fixed_result)["id"] == 8);
}

TEST_CASE("pet creation validates everything except urls while the url bug is on") {
  RunningFixture buggy;
  const std::string bad_url = R"({"name": "Ziggy", "photoUrls": ["not-a-url"]})";
  auto accepted = buggy.client->Post("/pet", bad_url, "application/json");
  CHECK(accepted->status == 200);  // invalid data slips through

  auto no_name = buggy.client->Post("/pet", R"({"photoUrls": []})", "application/json");
  CHECK(no_name->status == 400);
  CHECK(buggy.get_json(no_name)["message"] == "name is required and must be a non-empty string");

  auto no_urls = buggy.client->Post("/pet", R"({"name": "x"})", "application/json");
  CHECK(no_urls->status == 400);
  CHECK(buggy.get_json(no_urls)["message"] ==
        "photoUrls is required and must be an array of strings");

  auto bad_status = buggy.client->Post(
      "/pet", R"({"name": "x", "photoUrls": [], "status": "happy"})", "application/json");
  CHECK(bad_status->status == 400);
  CHECK(buggy.get_json(bad_status)["message"] == "status must be one of available, pending, sold");

  auto not_json = buggy.client->Post("/pet", "name=x", "application/json");
  CHECK(not_json->status == 400);
  CHECK(buggy.get_json(not_json)["message"] == "request body must be a JSON object");

  // Updates always validate URLs, so the same payload bounces off PUT.
  auto rejected = buggy.client->Put("/pet/7", bad_url, "application/json");
  CHECK(rejected->status == 400);
  CHECK(buggy.get_json(rejected)["message"] == "photoUrls entry is not a valid URL: not-a-url");

  RunningFixture fixed(FixtureBugs::none());
  auto post_rejected = fixed.client->Post("/pet", bad_url, "application/json");
  CHECK(post_rejected->status == 400);
  CHECK(fixed.get_json(post_rejected)["message"] ==
        "photoUrls entry is not a valid URL: not-a-url");
}

TEST_CASE("updating and deleting pets behaves per the document") {
  RunningFixture fixture;
  auto updated = fixture.client->Put(
      "/pet/7", R"({"name": "Rexx", "photoUrls": ["https://pets.example/rexx.jpg"]})",
      "application/json");
  CHECK(updated->status == 200);
  CHECK(fixture.get_json(updated)["name"] == "Rexx");

  CHECK(fixture.client->Put("/pet/999", kValidPet, "application/json")->status == 404);
  CHECK(fixture.client->Put("/pet/abc", kValidPet, "application/json")->status == 400);

  auto deleted = fixture.client->Delete("/pet/7");
  CHECK(deleted->status == 200);
  CHECK(fixture.service.pet_count() == 0);
  CHECK(fixture.client->Delete("/pet/7")->status == 404);
  CHECK(fixture.client->Delete("/pet/abc")->status == 400);
}

TEST_CASE("orders for deleted pets succeed only through the dangling-reference bug") {
  RunningFixture buggy;
  buggy.client->Delete("/pet/7");
  auto order = buggy.client->Post("/order", R"({"petId": 7})", "application/json");
  REQUIRE(order);
  CHECK(order->status == 200);
  auto order_body = buggy.get_json(order);
  CHECK(order_body["id"] == 1);
  CHECK(order_body["petId"] == 7);
  CHECK(order_body["status"] == "placed");
  CHECK(buggy.client->Get("/order/1")->status == 200);

  // A pet id that never existed is still a 404 even with the bug on.
  CHECK(buggy.client->Post("/order", R"({"petId": 424242})", "application/json")->status == 404);

  RunningFixture fixed(FixtureBugs::none());
  fixed.client->Delete("/pet/7");
  auto rejected = fixed.client->Post("/order", R"({"petId": 7})", "application/json");
  CHECK(rejected->status == 404);
  CHECK(fixed.get_json(rejected)["message"] == "pet not found");
}

TEST_CASE("ordering an existing pet is a 201 with validation on the way in") {
  RunningFixture fixture;
  auto order =
      fixture.client->Post("/order", R"({"petId": 7, "quantity": 2})", "application/json");
  CHECK(order->status == 201);
  CHECK(fixture.get_json(order)["quantity"] == 2);
  CHECK(fixture.service.order_count() == 1);

  CHECK(fixture.client->Post("/order", R"({"petId": "7"})", "application/json")->status == 400);
  CHECK(fixture.client->Post("/order", R"({"quantity": 1})", "application/json")->status == 400);
  auto zero = fixture.client->Post("/order", R"({"petId": 7, "quantity": 0})", "application/json");
  CHECK(zero->status == 400);
  CHECK(fixture.get_json(zero)["message"] == "quantity must be a positive integer");

  CHECK(fixture.client->Get("/order/99")->status == 404);
  CHECK(fixture.client->Get("/order/abc")->status == 400);
}

TEST_CASE("a non-numeric pet id crashes deterministically while the bug is on") {
  RunningFixture buggy;
  auto first = buggy.client->Get("/pet/abc");
  REQUIRE(first);
  CHECK(first->status == 500);
  CHECK(first->body.find("java.lang.NumberFormatException") != std::string::npos);
  CHECK(first->body.find("For input string: \"abc\"") != std::string::npos);
  CHECK(first->body.find("PetController.getPetById") != std::string::npos);

  auto second = buggy.client->Get("/pet/abc");
  CHECK(second->body == first->body);  // byte-identical across calls

  auto other_input = buggy.client->Get("/pet/%20weird");
  CHECK(other_input->status == 500);
  CHECK(other_input->body.find("For input string: \" weird\"") != std::string::npos);

  RunningFixture fixed(FixtureBugs::none());
  auto rejected = fixed.client->Get("/pet/abc");
  CHECK(rejected->status == 400);
  CHECK(fixed.get_json(rejected)["message"] == "petId must be numeric");
}

TEST_CASE("the status listing route wins over the pet id route") {
  RunningFixture fixture;
  auto listed = fixture.client->Get("/pet/findByStatus?status=available");
  REQUIRE(listed);
  CHECK(listed->status == 200);  // a misroute would crash on the non-numeric id
  auto pets = fixture.get_json(listed);
  REQUIRE(pets.is_array());
  REQUIRE(pets.size() == 1);
  CHECK(pets[0]["id"] == 7);

  CHECK(fixture.get_json(fixture.client->Get("/pet/findByStatus?status=sold")).empty());
  CHECK(fixture.client->Get("/pet/findByStatus")->status == 400);
  CHECK(fixture.client->Get("/pet/findByStatus?status=bogus")->status == 400);
}

TEST_CASE("user registration and login round-trip") {
  RunningFixture fixture;
  auto created =
      fixture.client->Post("/user", R"({"username": "ana", "password": "pw"})", "application/json");
  CHECK(created->status == 201);
  CHECK(fixture.service.user_count() == 1);

  auto duplicate =
      fixture.client->Post("/user", R"({"username": "ana", "password": "x"})", "application/json");
  CHECK(duplicate->status == 409);
  CHECK(fixture.get_json(duplicate)["message"] == "username already registered");

  auto incomplete = fixture.client->Post("/user", R"({"username": "bo"})", "application/json");
  CHECK(incomplete->status == 400);

  auto login = fixture.client->Get("/user/login?username=ana&password=pw");
  CHECK(login->status == 200);
  CHECK(fixture.get_json(login)["token"] == "tok-ana");

  CHECK(fixture.client->Get("/user/login?username=ana&password=wrong")->status == 401);
  CHECK(fixture.client->Get("/user/login?username=ana")->status == 400);
}

TEST_CASE("reset restores the seed snapshot including id counters") {
  RunningFixture fixture;
  fixture.client->Post("/pet", kValidPet, "application/json");
  fixture.client->Post("/order", R"({"petId": 7})", "application/json");
  fixture.client->Post("/user", R"({"username": "ana", "password": "pw"})", "application/json");
  CHECK(fixture.service.pet_count() == 2);

  auto reset = fixture.client->Post("/__reset", "", "application/json");
  CHECK(reset->status == 200);
  CHECK(fixture.service.pet_count() == 1);
  CHECK(fixture.service.order_count() == 0);
  CHECK(fixture.service.user_count() == 0);

  // Counters rewind too, so a fresh create lands on id 8 again.
  auto recreated = fixture.client->Post("/pet", kValidPet, "application/json");
  CHECK(fixture.get_json(recreated)["id"] == 8);

  fixture.service.reset();
  fixture.service.reset();  // idempotent
  CHECK(fixture.service.pet_count() == 1);
}

TEST_CASE("unknown routes answer structured json errors") {
  RunningFixture fixture;
  auto result = fixture.client->Get("/no/such/route");
  CHECK(result->status == 404);
  auto body = fixture.get_json(result);
  CHECK(body["code"] == 404);
  CHECK(body["message"] == "not found");
}

TEST_CASE("the echo route reports the raw request target") {
  RunningFixture fixture;
  auto result = fixture.client->Get("/echo/a%20b?x=1");
  CHECK(result->status == 200);
  CHECK(fixture.get_json(result)["target"] == "/echo/a%20b?x=1");
}

TEST_CASE("the served openapi document parses into the nine-operation catalog") {
  RunningFixture fixture;
  auto result = fixture.client->Get("/openapi");
  REQUIRE(result);
  CHECK(result->status == 200);

  std::vector<std::string> warnings;
  auto catalog = parse_spec(result->body, SpecFormat::json, &warnings);
  CHECK(warnings.empty());
  CHECK(catalog.title == "Petstore Fixture");
  CHECK(catalog.operations.size() == 9);
  CHECK(catalog.find("POST /pet") != nullptr);
  CHECK(catalog.find("GET /pet/{petId}") != nullptr);
  CHECK(catalog.find("DELETE /pet/{petId}") != nullptr);
  CHECK(catalog.find("GET /order/{orderId}") != nullptr);
}

TEST_CASE("the served document matches the committed copy byte for byte") {
  CHECK(fixture_openapi_document() == read_repo_file("fixtures/petstore_openapi.json"));
}

TEST_CASE("binding an occupied port fails with a clear error") {
  FixtureService first;
  first.start(0);
  FixtureService second;
  CHECK_THROWS_AS(second.start(first.port()), PortInUse);
  first.stop();
}

TEST_CASE("an unseeded fixture starts empty") {
  RunningFixture fixture(FixtureBugs{}, false);
  CHECK(fixture.service.pet_count() == 0);
  CHECK(fixture.client->Get("/pet/7")->status == 404);
}

#include "logitest/fixture_service.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "logitest/errors.hpp"
#include "logitest/httplib_shim.hpp"
#include "logitest/text.hpp"

namespace logitest {

using nlohmann::json;

namespace {

const std::set<std::string> kPetStatuses = {"available", "pending", "sold"};

json error_body(int code, const std::string& message) {
  return json{{"code", code}, {"message", message}};
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

bool is_http_url(const std::string& value) {
  for (const char* scheme : {"http://", "https://"}) {
    if (value.rfind(scheme, 0) == 0 && value.size() > std::string(scheme).size()) return true;
  }
  return false;
}

std::optional<long long> parse_id(const std::string& text) {
  if (text.empty()) return std::nullopt;
  for (char c : text)
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
  try {
    return std::stoll(text);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string stack_trace_body(const std::string& input) {
  std::ostringstream out;
  out << "java.lang.NumberFormatException: For input string: \"" << input << "\"\n"
      << "\tat java.base/java.lang.NumberFormatException.forInputString(NumberFormatException.java:67)\n"
      << "\tat java.base/java.lang.Long.parseLong(Long.java:711)\n"
      << "\tat java.base/java.lang.Long.valueOf(Long.java:1163)\n"
      << "\tat com.petstore.web.PetController.getPetById(PetController.java:58)\n"
      << "\tat com.petstore.web.Router.dispatch(Router.java:112)\n";
  return out.str();
}

std::optional<json> parse_object_body(const httplib::Request& req) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) return std::nullopt;
  return body;
}

// Returns an error body, or nullopt when the pet payload is acceptable.
std::optional<json> validate_pet_body(const json& body, bool strict_urls) {
  if (!body.contains("name") || !body["name"].is_string() ||
      body["name"].get<std::string>().empty())
    return error_body(400, "name is required and must be a non-empty string");
  if (!body.contains("photoUrls") || !body["photoUrls"].is_array())
    return error_body(400, "photoUrls is required and must be an array of strings");
  for (const auto& url : body["photoUrls"]) {
    if (!url.is_string())
      return error_body(400, "photoUrls is required and must be an array of strings");
    if (strict_urls && !is_http_url(url.get<std::string>()))
      return error_body(400, "photoUrls entry is not a valid URL: " + url.get<std::string>());
  }
  if (body.contains("status")) {
    if (!body["status"].is_string() || !kPetStatuses.count(body["status"].get<std::string>()))
      return error_body(400, "status must be one of available, pending, sold");
  }
  if (body.contains("category") && !body["category"].is_object())
    return error_body(400, "category must be an object");
  return std::nullopt;
}

json pet_from_body(long long id, const json& body) {
  json pet{{"id", id},
           {"name", body["name"]},
           {"photoUrls", body["photoUrls"]},
           {"status", body.value("status", "available")}};
  if (body.contains("category")) pet["category"] = body["category"];
  return pet;
}

}  // namespace

FixtureBugs FixtureBugs::from_csv(const std::string& csv) {
  FixtureBugs bugs = FixtureBugs::none();
  std::string token;
  std::istringstream stream(csv);
  while (std::getline(stream, token, ',')) {
    std::string name = to_lower(collapse_whitespace(token));
    if (name.empty()) continue;
    if (name == "b1")
      bugs.b1 = true;
    else if (name == "b2")
      bugs.b2 = true;
    else if (name == "b3")
      bugs.b3 = true;
    else if (name == "b4")
      bugs.b4 = true;
    else
      throw FatalSetup("unknown bug toggle '" + token + "' (expected B1..B4)");
  }
  return bugs;
}

struct FixtureService::Impl {
  FixtureBugs bugs;
  bool seed_data;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  mutable std::mutex mutex;
  std::map<std::string, std::string> users;  // username -> password
  std::set<std::string> sessions;
  std::map<long long, json> pets;
  std::map<long long, json> orders;
  std::set<long long> deleted_pet_ids;
  long long next_pet_id = 8;
  long long next_order_id = 1;

  Impl(FixtureBugs b, bool seed) : bugs(b), seed_data(seed) {
    // httplib's defaults include SO_REUSEPORT, which lets a second server
    // bind an occupied port instead of failing; tests need the bind to be
    // exclusive so a port clash is detectable.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes),
                 sizeof(yes));
    });
    reset_state();
    install_routes();
  }

  void reset_state() {
    users.clear();
    sessions.clear();
    pets.clear();
    orders.clear();
    deleted_pet_ids.clear();
    next_pet_id = 8;
    next_order_id = 1;
    if (seed_data) {
      pets[7] = json{{"id", 7},
                     {"name", "Rex"},
                     {"category", {{"id", 1}, {"name", "dogs"}}},
                     {"photoUrls", {"https://pets.example/rex.jpg"}},
                     {"status", "available"}};
    }
  }

  void install_routes() {
    server.Post("/user", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      auto body = parse_object_body(req);
      if (!body) return send_json(res, 400, error_body(400, "request body must be a JSON object"));
      if (!body->contains("username") || !(*body)["username"].is_string() ||
          (*body)["username"].get<std::string>().empty() || !body->contains("password") ||
          !(*body)["password"].is_string() || (*body)["password"].get<std::string>().empty())
        return send_json(res, 400, error_body(400, "username and password are required"));
      std::string username = (*body)["username"].get<std::string>();
      if (users.count(username))
        return send_json(res, 409, error_body(409, "username already registered"));
      users[username] = (*body)["password"].get<std::string>();
      send_json(res, 201, json{{"username", username}});
    });

    server.Get("/user/login", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      if (!req.has_param("username") || !req.has_param("password"))
        return send_json(res, 400, error_body(400, "username and password are required"));
      std::string username = req.get_param_value("username");
      auto it = users.find(username);
      if (it == users.end() || it->second != req.get_param_value("password"))
        return send_json(res, 401, error_body(401, "invalid username or password"));
      std::string token = "tok-" + username;
      sessions.insert(token);
      send_json(res, 200, json{{"token", token}});
    });

    server.Post("/pet", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      auto body = parse_object_body(req);
      if (!body) return send_json(res, 400, error_body(400, "request body must be a JSON object"));
      if (auto invalid = validate_pet_body(*body, !bugs.b2)) return send_json(res, 400, *invalid);
      long long id = next_pet_id++;
      pets[id] = pet_from_body(id, *body);
      send_json(res, bugs.b1 ? 200 : 201, pets[id]);
    });

    server.Get("/pet/findByStatus", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      if (!req.has_param("status"))
        return send_json(res, 400, error_body(400, "status query parameter is required"));
      std::string status = req.get_param_value("status");
      if (!kPetStatuses.count(status))
        return send_json(res, 400, error_body(400, "status must be one of available, pending, sold"));
      json list = json::array();
      for (const auto& [_, pet] : pets)
        if (pet["status"] == status) list.push_back(pet);
      send_json(res, 200, list);
    });

    server.Get(R"(/pet/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      const std::string& raw = req.matches[1];
      auto id = parse_id(raw);
      if (!id) {
        if (bugs.b4) {
          res.status = 500;
          res.set_content(stack_trace_body(raw), "text/plain");
          return;
        }
        return send_json(res, 400, error_body(400, "petId must be numeric"));
      }
      auto it = pets.find(*id);
      if (it == pets.end()) return send_json(res, 404, error_body(404, "pet not found"));
      send_json(res, 200, it->second);
    });

    server.Put(R"(/pet/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      auto id = parse_id(req.matches[1]);
      if (!id) return send_json(res, 400, error_body(400, "petId must be numeric"));
      auto it = pets.find(*id);
      if (it == pets.end()) return send_json(res, 404, error_body(404, "pet not found"));
      auto body = parse_object_body(req);
      if (!body) return send_json(res, 400, error_body(400, "request body must be a JSON object"));
      if (auto invalid = validate_pet_body(*body, true)) return send_json(res, 400, *invalid);
      it->second = pet_from_body(*id, *body);
      send_json(res, 200, it->second);
    });

    server.Delete(R"(/pet/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      auto id = parse_id(req.matches[1]);
      if (!id) return send_json(res, 400, error_body(400, "petId must be numeric"));
      auto it = pets.find(*id);
      if (it == pets.end()) return send_json(res, 404, error_body(404, "pet not found"));
      pets.erase(it);
      deleted_pet_ids.insert(*id);
      send_json(res, 200, json{{"message", "pet " + std::to_string(*id) + " deleted"}});
    });

    server.Post("/order", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      auto body = parse_object_body(req);
      if (!body) return send_json(res, 400, error_body(400, "request body must be a JSON object"));
      if (!body->contains("petId") || !(*body)["petId"].is_number_integer())
        return send_json(res, 400, error_body(400, "petId is required and must be an integer"));
      long long quantity = 1;
      if (body->contains("quantity")) {
        if (!(*body)["quantity"].is_number_integer() ||
            (*body)["quantity"].get<long long>() < 1)
          return send_json(res, 400, error_body(400, "quantity must be a positive integer"));
        quantity = (*body)["quantity"].get<long long>();
      }
      long long pet_id = (*body)["petId"].get<long long>();
      bool exists = pets.count(pet_id) > 0;
      bool deleted = deleted_pet_ids.count(pet_id) > 0;
      if (!exists && !(deleted && bugs.b3))
        return send_json(res, 404, error_body(404, "pet not found"));
      long long id = next_order_id++;
      orders[id] = json{{"id", id}, {"petId", pet_id}, {"quantity", quantity}, {"status", "placed"}};
      send_json(res, (deleted && bugs.b3) ? 200 : 201, orders[id]);
    });

    server.Get(R"(/order/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      auto id = parse_id(req.matches[1]);
      if (!id) return send_json(res, 400, error_body(400, "orderId must be numeric"));
      auto it = orders.find(*id);
      if (it == orders.end()) return send_json(res, 404, error_body(404, "order not found"));
      send_json(res, 200, it->second);
    });

    server.Get("/openapi", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(fixture_openapi_document(), "application/json");
    });

    // Echoes the raw request target so tests can assert on-the-wire encoding.
    server.Get(R"(/echo(.*))", [](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, json{{"target", req.target}, {"path", req.path}});
    });

    server.Post("/__reset", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex);
      reset_state();
      send_json(res, 200, json{{"message", "reset"}});
    });

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty())
        res.set_content(error_body(res.status, "not found").dump(), "application/json");
    });
  }
};

FixtureService::FixtureService(FixtureBugs bugs, bool seed_data)
    : impl_(std::make_unique<Impl>(bugs, seed_data)) {}

FixtureService::~FixtureService() { stop(); }

void FixtureService::start(int port) {
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
    if (impl_->port < 0) throw PortInUse("cannot bind a free port on 127.0.0.1");
  } else {
    if (!impl_->server.bind_to_port("127.0.0.1", port))
      throw PortInUse("cannot bind 127.0.0.1:" + std::to_string(port));
    impl_->port = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void FixtureService::stop() {
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

int FixtureService::port() const { return impl_->port; }

std::string FixtureService::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

void FixtureService::reset() {
  std::lock_guard lock(impl_->mutex);
  impl_->reset_state();
}

std::size_t FixtureService::pet_count() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->pets.size();
}

std::size_t FixtureService::order_count() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->orders.size();
}

std::size_t FixtureService::user_count() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->users.size();
}

std::string fixture_openapi_document() {
  json pet_schema{
      {"type", "object"},
      {"required", {"name", "photoUrls"}},
      {"properties",
       {{"name",
         {{"type", "string"}, {"description", "Display name of the pet."}, {"example", "Rex"}}},
        {"photoUrls",
         {{"type", "array"},
          {"items", {{"type", "string"}}},
          {"description", "Photo links; each entry must be an http or https URL."}}},
        {"status",
         {{"type", "string"},
          {"description", "Availability in the store: available, pending, or sold."},
          {"example", "available"}}},
        {"category",
         {{"type", "object"},
          {"description", "Grouping the pet belongs to."},
          {"properties",
           {{"id", {{"type", "integer"}, {"example", 1}}},
            {"name", {{"type", "string"}, {"example", "dogs"}}}}}}}}}};

  json order_schema{
      {"type", "object"},
      {"required", {"petId"}},
      {"properties",
       {{"petId",
         {{"type", "integer"}, {"description", "Id of the pet being ordered."}, {"example", 7}}},
        {"quantity",
         {{"type", "integer"},
          {"description", "How many to order; defaults to 1."},
          {"example", 1}}}}}};

  json user_schema{
      {"type", "object"},
      {"required", {"username", "password"}},
      {"properties",
       {{"username",
         {{"type", "string"}, {"description", "Unique account name."}, {"example", "ana"}}},
        {"password", {{"type", "string"}, {"description", "Account password."}}}}}};

  auto body_ref = [](const std::string& name) {
    return json{{"required", true},
                {"content",
                 {{"application/json", {{"schema", {{"$ref", "#/components/schemas/" + name}}}}}}}};
  };
  auto response = [](const std::string& description) {
    return json{{"description", description}};
  };

  json doc{
      {"openapi", "3.0.3"},
      {"info",
       {{"title", "Petstore Fixture"},
        {"version", "1.0.0"},
        {"description", "A small pet store with user accounts, pets, and orders."}}},
      {"paths",
       {{"/user",
         {{"post",
           {{"summary", "Register a new user"},
            {"description", "Creates a user account so the login endpoint can issue a token."},
            {"requestBody", body_ref("User")},
            {"responses",
             {{"201", response("User created")},
              {"400", response("Missing or malformed username or password")},
              {"409", response("Username already registered")}}}}}}},
        {"/user/login",
         {{"get",
           {{"summary", "Log in a user"},
            {"description", "Checks the credentials and returns a session token."},
            {"parameters",
             {{{"name", "username"},
               {"in", "query"},
               {"required", true},
               {"description", "Account name to log in."},
               {"schema", {{"type", "string"}}}},
              {{"name", "password"},
               {"in", "query"},
               {"required", true},
               {"description", "Password for the account."},
               {"schema", {{"type", "string"}}}}}},
            {"responses",
             {{"200", response("Login succeeded; the body carries the session token")},
              {"400", response("Missing credentials")},
              {"401", response("Unknown user or wrong password")}}}}}}},
        {"/pet",
         {{"post",
           {{"summary", "Add a new pet to the store"},
            {"description",
             "Creates a pet profile. Every photoUrls entry must be an http or https URL."},
            {"requestBody", body_ref("Pet")},
            {"responses",
             {{"201", response("Pet created")},
              {"400",
               response("Validation failed: missing name, missing photoUrls, an entry that is "
                        "not a valid URL, or an unknown status")}}}}}}},
        {"/pet/findByStatus",
         {{"get",
           {{"summary", "List pets by status"},
            {"description", "Returns every pet whose status matches the query."},
            {"parameters",
             {{{"name", "status"},
               {"in", "query"},
               {"required", true},
               {"description", "One of available, pending, sold."},
               {"schema", {{"type", "string"}, {"example", "available"}}}}}},
            {"responses",
             {{"200", response("Matching pets")},
              {"400", response("Missing or unknown status value")}}}}}}},
        {"/pet/{petId}",
         {{"get",
           {{"summary", "Find a pet by id"},
            {"description", "Returns a single pet."},
            {"parameters",
             {{{"name", "petId"},
               {"in", "path"},
               {"required", true},
               {"description", "Numeric id of the pet to fetch."},
               {"schema", {{"type", "integer"}, {"example", 7}}}}}},
            {"responses",
             {{"200", response("Pet found")},
              {"400", response("petId is not a number")},
              {"404", response("No pet with this id")}}}}},
          {"put",
           {{"summary", "Update an existing pet"},
            {"description",
             "Replaces the stored pet profile. The same validation as pet creation applies."},
            {"parameters",
             {{{"name", "petId"},
               {"in", "path"},
               {"required", true},
               {"description", "Numeric id of the pet to update."},
               {"schema", {{"type", "integer"}}}}}},
            {"requestBody", body_ref("Pet")},
            {"responses",
             {{"200", response("Pet updated")},
              {"400", response("Validation failed or petId is not a number")},
              {"404", response("No pet with this id")}}}}},
          {"delete",
           {{"summary", "Delete a pet"},
            {"description", "Removes the pet from the store."},
            {"parameters",
             {{{"name", "petId"},
               {"in", "path"},
               {"required", true},
               {"description", "Numeric id of the pet to delete."},
               {"schema", {{"type", "integer"}}}}}},
            {"responses",
             {{"200", response("Pet deleted")},
              {"400", response("petId is not a number")},
              {"404", response("No pet with this id")}}}}}}},
        {"/order",
         {{"post",
           {{"summary", "Place an order for a pet"},
            {"description",
             "Orders an existing pet. Orders for deleted or unknown pets are rejected with 404."},
            {"requestBody", body_ref("Order")},
            {"responses",
             {{"201", response("Order placed")},
              {"400", response("Missing petId or non-positive quantity")},
              {"404", response("The referenced pet does not exist or was deleted")}}}}}}},
        {"/order/{orderId}",
         {{"get",
           {{"summary", "Find an order by id"},
            {"description", "Returns a single order."},
            {"parameters",
             {{{"name", "orderId"},
               {"in", "path"},
               {"required", true},
               {"description", "Numeric id of the order."},
               {"schema", {{"type", "integer"}, {"example", 1}}}}}},
            {"responses",
             {{"200", response("Order found")},
              {"400", response("orderId is not a number")},
              {"404", response("No order with this id")}}}}}}}}},
      {"components",
       {{"schemas",
         {{"Pet", std::move(pet_schema)},
          {"Order", std::move(order_schema)},
          {"User", std::move(user_schema)}}}}}};

  return doc.dump(2) + "\n";
}

}  // namespace logitest

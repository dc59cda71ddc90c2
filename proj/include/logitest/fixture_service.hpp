#pragma once

#include <memory>
#include <string>

namespace logitest {

// Seeded logical bugs, each independently toggleable. All default to on:
// the fixture exists to give the detector something to find.
struct FixtureBugs {
  bool b1 = true;  // POST /pet answers 200 instead of 201
  bool b2 = true;  // POST /pet accepts photoUrls entries that are not URLs
  bool b3 = true;  // POST /order succeeds for a deleted pet
  bool b4 = true;  // GET /pet/{petId} with a non-numeric id crashes with a 500

  static FixtureBugs none() { return FixtureBugs{false, false, false, false}; }
  // Parses "B1,B3" style lists (case-insensitive); unknown names throw.
  static FixtureBugs from_csv(const std::string& csv);
};

// In-memory petstore-like service: users, pets, orders, and the bugs above.
// With every bug off it behaves exactly as its own OpenAPI document says.
class FixtureService {
 public:
  explicit FixtureService(FixtureBugs bugs = {}, bool seed_data = true);
  ~FixtureService();

  FixtureService(const FixtureService&) = delete;
  FixtureService& operator=(const FixtureService&) = delete;

  // Binds 127.0.0.1:port (port 0 picks a free one) and serves on a
  // background thread. Throws PortInUse when the bind fails.
  void start(int port = 0);
  void stop();

  int port() const;
  std::string base_url() const;

  // Restores the seed snapshot; also reachable as POST /__reset.
  void reset();

  std::size_t pet_count() const;
  std::size_t order_count() const;
  std::size_t user_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// The OpenAPI 3.0 document the fixture serves at GET /openapi. It documents
// the corrected behavior (201 on creation, URL validation, 404 for orders
// on missing pets), so every seeded bug shows up as a mismatch against it.
std::string fixture_openapi_document();

}  // namespace logitest

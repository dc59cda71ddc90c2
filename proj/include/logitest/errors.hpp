#pragma once

#include <stdexcept>
#include <string>

namespace logitest {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- spec ingestion ---

class MalformedDocument : public Error {
 public:
  explicit MalformedDocument(const std::string& what) : Error(what) {}
};

class EmptySpec : public Error {
 public:
  explicit EmptySpec(const std::string& what) : Error(what) {}
};

// --- vector math ---

class ZeroVector : public Error {
 public:
  explicit ZeroVector(const std::string& what) : Error(what) {}
};

class LengthMismatch : public Error {
 public:
  explicit LengthMismatch(const std::string& what) : Error(what) {}
};

// --- scheduler ---

class NoActiveScenario : public Error {
 public:
  explicit NoActiveScenario(const std::string& what) : Error(what) {}
};

class ScenarioStillActive : public Error {
 public:
  explicit ScenarioStillActive(const std::string& what) : Error(what) {}
};

// --- llm gateway ---

class GatewayError : public Error {
 public:
  explicit GatewayError(const std::string& what) : Error(what) {}
};

// Raised by the mock completion provider when a routing key has no replies
// left to replay.
class ScriptExhausted : public GatewayError {
 public:
  explicit ScriptExhausted(const std::string& what) : GatewayError(what) {}
};

// --- agents ---

class ParseFailure : public Error {
 public:
  explicit ParseFailure(const std::string& what) : Error(what) {}
};

class GenerationFailed : public Error {
 public:
  explicit GenerationFailed(const std::string& what) : Error(what) {}
};

class RequestConstructionFailed : public Error {
 public:
  explicit RequestConstructionFailed(const std::string& what) : Error(what) {}
};

// --- fixture service ---

class PortInUse : public Error {
 public:
  explicit PortInUse(const std::string& what) : Error(what) {}
};

// --- campaign ---

// Spec or provider failure before the campaign loop starts.
class FatalSetup : public Error {
 public:
  explicit FatalSetup(const std::string& what) : Error(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace logitest

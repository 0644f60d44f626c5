#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mldoc {

// Base of every error the engine raises. `code()` is a stable machine-readable
// tag used by the CLI and the HTTP service.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config_error", message) {}
};

class InputError : public Error {
public:
    explicit InputError(const std::string& message) : Error("input_error", message) {}
};

class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& message) : Error("protocol_error", message) {}
};

class CapabilityError : public Error {
public:
    explicit CapabilityError(const std::string& message) : Error("capability_error", message) {}
};

// Transport failure after all retries; carries one line per attempt.
class GatewayError : public Error {
public:
    GatewayError(const std::string& message, std::vector<std::string> attempts)
        : Error("gateway_error", message), attempts_(std::move(attempts)) {}

    const std::vector<std::string>& attempts() const noexcept { return attempts_; }

private:
    std::vector<std::string> attempts_;
};

// The server rejected a request because the prompt exceeds its context window.
class ContextOverflowError : public Error {
public:
    explicit ContextOverflowError(const std::string& message)
        : Error("context_overflow", message) {}
};

// Model output did not contain a usable query-answer array.
class GenerationParseError : public Error {
public:
    GenerationParseError(const std::string& message, std::string raw)
        : Error("generation_parse_error", message), raw_(std::move(raw)) {}

    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class BuildError : public Error {
public:
    explicit BuildError(const std::string& message) : Error("build_error", message) {}
};

class LoadError : public Error {
public:
    explicit LoadError(const std::string& message) : Error("load_error", message) {}
};

// A store directory lacks the artifact a command needs (no ingest, no build).
class MissingArtifactError : public Error {
public:
    explicit MissingArtifactError(const std::string& message)
        : Error("missing_artifact", message) {}
};

class JudgeParseError : public Error {
public:
    JudgeParseError(const std::string& message, std::string raw)
        : Error("judge_parse_error", message), raw_(std::move(raw)) {}

    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

}  // namespace mldoc

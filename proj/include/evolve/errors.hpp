#pragma once

#include <stdexcept>
#include <string>

namespace evolve {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Network failure, non-2xx status, or empty model output after retries.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int status = 0, std::string body = {})
        : Error(what), status_(status), body_(std::move(body)) {}
    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

/// No JSON document could be recovered from model output.
class ExtractionError : public Error {
public:
    ExtractionError(const std::string& what, std::string raw)
        : Error(what), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

/// Teacher payload parsed but did not match the expected shape.
class SchemaError : public Error {
public:
    SchemaError(const std::string& what, std::string raw)
        : Error(what), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class StoreError : public Error {
public:
    using Error::Error;
};

/// Vector index and metadata store disagree.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// Pipeline failure tagged with the stage that raised it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message)
        : Error(stage + ": " + message), stage_(std::move(stage)), message_(message) {}
    const std::string& stage() const noexcept { return stage_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::string stage_;
    std::string message_;
};

}  // namespace evolve

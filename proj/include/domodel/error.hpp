#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace domodel {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyName : public Error {
public:
    explicit EmptyName(const std::string& raw)
        : Error("name is empty after trimming: '" + raw + "'") {}
};

class ProviderError : public Error {
public:
    using Error::Error;
};

class ReplayMiss : public Error {
public:
    ReplayMiss(std::string key, int attempt)
        : Error("no recorded transcript for key " + key + " attempt " + std::to_string(attempt)),
          key_(std::move(key)), attempt_(attempt) {}

    const std::string& key() const noexcept { return key_; }
    int attempt() const noexcept { return attempt_; }

private:
    std::string key_;
    int attempt_;
};

/// Thrown by parse callbacks handed to complete_with_reparse; triggers a retry.
class ParseFailure : public Error {
public:
    using Error::Error;
};

/// Zero elements could be parsed out of non-empty LLM output.
class EmptyOutput : public ParseFailure {
public:
    EmptyOutput() : ParseFailure("no element could be parsed from the output") {}
};

class ExhaustedRetries : public Error {
public:
    ExhaustedRetries(std::string last_error, std::vector<std::string> responses)
        : Error("gave up after " + std::to_string(responses.size()) +
                " attempts: " + last_error),
          last_error_(std::move(last_error)), responses_(std::move(responses)) {}

    const std::string& last_error() const noexcept { return last_error_; }
    const std::vector<std::string>& responses() const noexcept { return responses_; }

private:
    std::string last_error_;
    std::vector<std::string> responses_;
};

class MissingInput : public Error {
public:
    using Error::Error;
};

class NoKnowledge : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

}  // namespace domodel

#pragma once

#include <stdexcept>
#include <string>

namespace spotlight {

// Error taxonomy. The CLI maps each family onto a fixed exit code:
// ConfigError -> 2, BackendError/ContractError -> 3, InputError/DomainError/ValidationError -> 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Precondition or argument outside an operation's domain.
class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Unreadable or undecodable input (missing file, bad image bytes).
class InputError : public Error {
public:
    using Error::Error;
};

// Dataset / index validation; carries every problem found, one per line.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A backend answered but broke its wire contract (e.g. wrong embedding dim). Not retryable.
class ContractError : public Error {
public:
    using Error::Error;
};

// Transport-level failure. Retryable; `attempts` is how many tries were made before giving up.
class BackendError : public Error {
public:
    BackendError(const std::string& what, int attempts = 1)
        : Error(what), attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

}  // namespace spotlight

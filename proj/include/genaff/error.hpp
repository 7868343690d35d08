#pragma once

#include <stdexcept>
#include <string>

namespace genaff {

enum class Status {
    ok = 0,
    invalid_argument = 1,
    io = 2,
    parse = 3,
    validation = 4,
    endpoint = 5,
    missing_input = 6,
    internal = 7,
};

const char* status_name(Status s);

class Error : public std::runtime_error {
public:
    Error(Status status, std::string message)
        : std::runtime_error(std::move(message)), status_(status) {}

    Status status() const { return status_; }

private:
    Status status_;
};

[[noreturn]] inline void raise(Status status, const std::string& message) {
    throw Error(status, message);
}

} // namespace genaff

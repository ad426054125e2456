// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace arbiscale {

// Error taxonomy shared by the C++ core, the C API and the CLI exit codes.
enum class Status {
    kOk = 0,
    kInvalidArgument = 1,
    kConfig = 2,
    kIo = 3,
    kNumeric = 4,
    kTraining = 5,
    kResource = 6,
    kInternal = 7,
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

[[noreturn]] inline void fail(Status status, const std::string& message) {
    throw Error(status, message);
}

inline void require(bool cond, Status status, const std::string& message) {
    if (!cond) fail(status, message);
}

} // namespace arbiscale

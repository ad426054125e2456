// SPDX-License-Identifier: Apache-2.0
#include "core/status.hpp"

namespace arbiscale {

const char* status_name(Status s) {
    switch (s) {
    case Status::kOk: return "ok";
    case Status::kInvalidArgument: return "invalid_argument";
    case Status::kConfig: return "config_error";
    case Status::kIo: return "io_error";
    case Status::kNumeric: return "numeric_error";
    case Status::kTraining: return "training_failure";
    case Status::kResource: return "resource_error";
    case Status::kInternal: return "internal_error";
    }
    return "unknown";
}

} // namespace arbiscale

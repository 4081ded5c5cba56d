// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dvf {

// Error classes map to process exit codes (see tools/dvf_main.cpp):
// 2 configuration, 3 data, 4 provider, 5 numerics, 1 anything else.
enum class ErrorClass { internal = 1, configuration = 2, data = 3, provider = 4, numerics = 5 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& msg) : std::runtime_error(msg), cls_(cls) {}
    ErrorClass error_class() const noexcept { return cls_; }
    int exit_code() const noexcept { return static_cast<int>(cls_); }

private:
    ErrorClass cls_;
};

struct ConfigurationError : Error {
    explicit ConfigurationError(const std::string& m) : Error(ErrorClass::configuration, m) {}
};
struct ManifestError : Error {
    explicit ManifestError(const std::string& m) : Error(ErrorClass::data, m) {}
};
struct DataError : Error {
    explicit DataError(const std::string& m) : Error(ErrorClass::data, m) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error(ErrorClass::data, m) {}
};
struct GeometryError : Error {
    explicit GeometryError(const std::string& m) : Error(ErrorClass::data, m) {}
};
struct LabelError : Error {
    explicit LabelError(const std::string& m) : Error(ErrorClass::data, m) {}
};
struct ProviderError : Error {
    explicit ProviderError(const std::string& m) : Error(ErrorClass::provider, m) {}
};
struct NumericsError : Error {
    explicit NumericsError(const std::string& m) : Error(ErrorClass::numerics, m) {}
};
struct InternalError : Error {
    explicit InternalError(const std::string& m) : Error(ErrorClass::internal, m) {}
};

}  // namespace dvf

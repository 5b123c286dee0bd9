// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <stdexcept>
#include <string>

namespace sfseg {

/// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed file contents: wrong magic, unsupported version/dtype, bad PGM header.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Structurally valid header but payload does not match it (truncation, size mismatch).
class CorruptionError : public Error {
public:
    using Error::Error;
};

/// A value-level invariant is violated (NaN payload, negative unary, bad config field).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Operands whose shapes must agree do not.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A scalar parameter is outside its legal range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Problem size exceeds what the explicit-matrix path is allowed to materialize.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// An iteration produced an identically-zero vector and cannot continue.
class DegenerateSolutionError : public Error {
public:
    using Error::Error;
};

/// Filesystem-level failure (cannot open/read/write).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace sfseg

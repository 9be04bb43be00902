// SPDX-License-Identifier: Apache-2.0
//
// qdchan: quasi-deterministic mmWave channel generator
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef QDCHAN_ERROR_HPP
#define QDCHAN_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qdchan {

// Distribution or formula parameter outside its domain (negative sigma, lambda <= 0, ...)
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Point outside the room, coincident endpoints, bad room dimensions
class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Material name not present in the library
class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// Structured document failed schema validation; field() names the offending key
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string &what)
        : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
    const std::string &field() const noexcept { return field_; }

private:
    std::string field_;
};

// Complete-model expansion would exceed the configured MPC cap
class ResourceError : public std::length_error {
public:
    using std::length_error::length_error;
};

// Tabular file could not be parsed; line() is 1-based, 0 when unknown
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string &what)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Scenario configuration rejected (maps to CLI exit code 2)
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string &what)
        : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
    const std::string &field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace qdchan

#endif // QDCHAN_ERROR_HPP

// Copyright 2026 The midstate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace midstate {

// Root of every error raised by the library. Subclasses map one-to-one onto
// the failure classes callers are expected to distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public InputError {
 public:
  using InputError::InputError;
};

class ScheduleError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public ScheduleError {
 public:
  using ScheduleError::ScheduleError;
};

class OrderingError : public ScheduleError {
 public:
  using ScheduleError::ScheduleError;
};

class StatisticalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class LoadError : public IoError {
 public:
  using IoError::IoError;
};

class CorruptionError : public LoadError {
 public:
  using LoadError::LoadError;
};

class MigrationError : public LoadError {
 public:
  using LoadError::LoadError;
};

}  // namespace midstate

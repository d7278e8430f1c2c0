#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace iottrust {

using DeviceId = std::string;
using Symbol = std::uint32_t;
using LogicalTime = std::uint64_t;

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Malformed external input (trace lines, scenario files, ledger dumps).
class ParseError : public Error
{
public:
  using Error::Error;
};

/// Invalid configuration value or unknown enum tag.
class ConfigError : public Error
{
public:
  using Error::Error;
};

/// Violated precondition of an operation.
class ContractError : public Error
{
public:
  using Error::Error;
};

/// Corrupt or incompatible serialized data.
class DecodeError : public Error
{
public:
  using Error::Error;
};

}  // namespace iottrust

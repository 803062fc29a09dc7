#include "fedsim/format.hpp"

#include "fedsim/error.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <string>

namespace fedsim {

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw Error(ErrorCode::kIo, "format_real: conversion failed");
  return std::string(buf.data(), end);
}

double parse_real(std::string_view text, std::string_view what) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kConfig,
                std::string(what) + ": expected a real number, got '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace fedsim

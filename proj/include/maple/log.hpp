#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace maple {

// Non-fatal diagnostics (skipped records, omitted judge lines, ...) go
// through a process-wide handler so tests can observe them.
using WarnHandler = std::function<void(const std::string&)>;

namespace detail {
inline std::mutex& warn_mutex() {
  static std::mutex m;
  return m;
}
inline WarnHandler& warn_handler() {
  static WarnHandler h = [](const std::string& msg) {
    std::cerr << "[maple] warning: " << msg << "\n";
  };
  return h;
}
}  // namespace detail

inline void set_warn_handler(WarnHandler handler) {
  std::lock_guard<std::mutex> lock(detail::warn_mutex());
  detail::warn_handler() = std::move(handler);
}

inline void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(detail::warn_mutex());
  if (detail::warn_handler()) detail::warn_handler()(message);
}

// RAII capture for tests: warnings are collected instead of printed,
// the previous handler is restored on destruction.
class WarningCapture {
 public:
  WarningCapture() {
    std::lock_guard<std::mutex> lock(detail::warn_mutex());
    previous_ = detail::warn_handler();
    detail::warn_handler() = [this](const std::string& msg) {
      std::lock_guard<std::mutex> inner(messages_mutex_);
      messages_.push_back(msg);
    };
  }

  ~WarningCapture() {
    std::lock_guard<std::mutex> lock(detail::warn_mutex());
    detail::warn_handler() = previous_;
  }

  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  std::vector<std::string> messages() const {
    std::lock_guard<std::mutex> lock(messages_mutex_);
    return messages_;
  }

  bool contains(const std::string& needle) const {
    std::lock_guard<std::mutex> lock(messages_mutex_);
    for (const auto& m : messages_) {
      if (m.find(needle) != std::string::npos) return true;
    }
    return false;
  }

 private:
  WarnHandler previous_;
  mutable std::mutex messages_mutex_;
  std::vector<std::string> messages_;
};

}  // namespace maple

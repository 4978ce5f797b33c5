#pragma once

#include <functional>
#include <iostream>
#include <string>
#include <utility>

namespace kgec {

using WarningSink = std::function<void(const std::string&)>;

// Process-wide destination for non-fatal warnings. Defaults to stderr.
inline WarningSink& warning_sink() {
    static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return sink;
}

inline void warn(const std::string& msg) {
    if (warning_sink()) warning_sink()(msg);
}

// Swaps the sink for the lifetime of the guard.
class ScopedWarningSink {
   public:
    explicit ScopedWarningSink(WarningSink sink) : previous_(std::exchange(warning_sink(), std::move(sink))) {}
    ~ScopedWarningSink() { warning_sink() = std::move(previous_); }
    ScopedWarningSink(const ScopedWarningSink&) = delete;
    ScopedWarningSink& operator=(const ScopedWarningSink&) = delete;

   private:
    WarningSink previous_;
};

}  // namespace kgec

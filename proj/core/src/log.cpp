#include "vpsvm/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace vpsvm {

namespace {

std::mutex &sink_mutex() {
    static std::mutex m;
    return m;
}

warning_sink &current_sink() {
    static warning_sink sink = [](std::string_view message) { std::cerr << "warning: " << message << '\n'; };
    return sink;
}

}  // namespace

warning_sink set_warning_sink(warning_sink sink) {
    const std::lock_guard lock{ sink_mutex() };
    return std::exchange(current_sink(), std::move(sink));
}

void warn(std::string_view message) {
    const std::lock_guard lock{ sink_mutex() };
    if (current_sink()) {
        current_sink()(message);
    }
}

}  // namespace vpsvm

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace swr {

/// Stamped into resolved configs and reports so artifacts can be traced to a
/// library revision.
inline constexpr const char* kArtifactVersion = "swr-0.1.0";

/// Error type thrown across the library. CLI maps these to exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void concat_into(std::ostringstream&) {}

template <class T, class... Rest>
void concat_into(std::ostringstream& os, const T& head, const Rest&... rest) {
    os << head;
    concat_into(os, rest...);
}
}  // namespace detail

template <class... Args>
std::string strcat_msg(const Args&... args) {
    std::ostringstream os;
    detail::concat_into(os, args...);
    return os.str();
}

template <class... Args>
[[noreturn]] void fail(const Args&... args) {
    throw Error(strcat_msg(args...));
}

template <class... Args>
void require(bool cond, const Args&... args) {
    if (!cond) fail(args...);
}

}  // namespace swr

#pragma once

#include <string>
#include <vector>

namespace fixtures {

inline const std::string kExampleLine =
    R"(john.smith@gmail.com | high | 2(Contact & Financial) | {"x1":80, "y1":250, "x2":740, "y2":350} | necessary)";

// Each line must yield exactly one parse error.
inline const std::vector<std::string> kMalformedLines = {
    R"(foo | ultra | 9(X) | {} | maybe)",
    R"(just a sentence without any delimiter)",
    R"(a | high | 2(Contact) | {"x1":1, "y1":2, "x2":3} | necessary)",
    R"(a | high | 2(Contact) | {"x1":500, "y1":0, "x2":100, "y2":10} | necessary)",
    R"(a | high | 0(None) | {"x1":0, "y1":0, "x2":10, "y2":10} | necessary)",
    R"(a | high | 7(Other) | {"x1":0, "y1":0, "x2":10, "y2":10} | necessary)",
    R"(a | high | abc | {"x1":0, "y1":0, "x2":10, "y2":10} | necessary)",
    R"(a | high | - | {"x1":0, "y1":0, "x2":10, "y2":10} | necessary)",
    R"(a | low | 3(Tech) | {"x1":0, "y1":0, "x2":10, "y2":10} | maybe)",
    R"(a | low | 3(Tech) | {"x1":0, "y1":0, "x2":10, "y2":10})",
    R"(a|b)",
    R"( | high | 1(Core) | {"x1":0, "y1":0, "x2":10, "y2":10} | necessary)",
    R"(a | medium | 4(Trace) | {x1:0, y1:0, x2:10, y2:10} | not_necessary)",
    R"(a | medium | 4(Trace) | [0, 0, 10, 10] | not_necessary)",
    R"(a | medium | 4(Trace) | {"x1":1200, "y1":0, "x2":1500, "y2":10} | not_necessary)",
    R"(a | medium | 4(Trace) | {"x1":"left", "y1":0, "x2":10, "y2":10} | not_necessary)",
    R"(a |  | 4(Trace) | {"x1":0, "y1":0, "x2":10, "y2":10} | not_necessary)",
    R"(a | high | 1(Core) | {"x1":NaN, "y1":0, "x2":10, "y2":10} | necessary)",
    R"( |  |  |  | )",
    R"(a | high | 1(Core) | {} | necessary)",
};

}  // namespace fixtures

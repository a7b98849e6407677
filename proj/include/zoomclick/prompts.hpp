#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace zoomclick {

// Prompt templates shipped with the toolkit. `{instruction}` is the only
// substituted token; everything else reaches the model verbatim. Copies
// live under prompts/ for operators who want to customize them per model.

inline constexpr const char* kBboxPromptTemplate =
    "Outline the position corresponding to the instruction: {instruction}.\n"
    "The output should be only [x1, y1, x2, y2].";

inline constexpr const char* kToolcallSystemPrompt =
    "You are a helpful assistant that can click on elements in UI screenshots.\n"
    "You are provided with a set of available tools inside XML tags:\n"
    "<tools>{...}</tools>. Each tool is specified by a JSON function signature.\n"
    "IMPORTANT: You must respond by calling one of these tools to click on the "
    "requested element.\n"
    "For each function call, you must return a JSON object wrapped in "
    "<tool_call>...</tool_call> tags:\n"
    "<tool_call>\n"
    "{\"name\": <function-name>, \"arguments\": <args-json-object>}\n"
    "</tool_call>\n"
    "Example: To left-click at coordinates (500, 300), respond with:\n"
    "<tool_call>\n"
    "{\"name\": \"computer_use\", \"arguments\": {\"action\": \"left_click\", "
    "\"coordinate\": [500, 300]}}\n"
    "</tool_call>";

inline constexpr const char* kToolcallUserTemplate =
    "Please click on the element described as: {instruction}.\n"
    "Respond with a tool call containing the exact pixel coordinates.";

/// Replace every `{instruction}` token in the template.
inline std::string render_prompt(std::string_view tmpl,
                                 const std::string& instruction)
{
    static constexpr std::string_view kToken = "{instruction}";
    std::string out;
    out.reserve(tmpl.size() + instruction.size());
    size_t pos = 0;
    for (;;) {
        const size_t hit = tmpl.find(kToken, pos);
        if (hit == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            return out;
        }
        out.append(tmpl.substr(pos, hit - pos));
        out.append(instruction);
        pos = hit + kToken.size();
    }
}

inline std::string load_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open text file: " + path);
    }
    std::ostringstream oss;
    oss << in.rdbuf();
    return oss.str();
}

} // namespace zoomclick

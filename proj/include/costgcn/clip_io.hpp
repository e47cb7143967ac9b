#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "costgcn/tensor.hpp"
#include "costgcn/weights.hpp"

namespace costgcn {

// A clip file is a COSG container holding exactly one tensor, "clip" [C0, T, V, M].
inline void write_clip(const std::filesystem::path& path, const Tensor& clip) {
    if (clip.rank() != 4) throw DimensionError("write_clip: expected [C0,T,V,M], got " + shape_str(clip.shape()));
    save_weights(path, WeightStore{{"clip", clip}});
}

inline Tensor clip_from_store(const WeightStore& store) {
    auto it = store.find("clip");
    if (it == store.end()) throw FormatError("clip container has no tensor named 'clip'");
    if (store.size() != 1) throw FormatError("clip container must hold only the 'clip' tensor");
    if (it->second.rank() != 4) {
        throw FormatError("clip tensor must be [C0,T,V,M], got " + shape_str(it->second.shape()));
    }
    return it->second;
}

inline Tensor read_clip(const std::filesystem::path& path) { return clip_from_store(load_weights(path)); }

// Frames [C0, V, M] of a clip in time order.
inline Tensor clip_frame(const Tensor& clip, std::size_t t) {
    const std::size_t C = clip.dim(0), T = clip.dim(1), V = clip.dim(2), M = clip.dim(3);
    Tensor f({C, V, M});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t v = 0; v < V; ++v)
            for (std::size_t m = 0; m < M; ++m) f(c, v, m) = clip[((c * T + t) * V + v) * M + m];
    return f;
}

struct SkeletonFrame {
    long long t = 0;
    Tensor data;  // [C0, V, M]
};

// Parses one JSON line {"t": int, "bodies": [[[c0, c1, c2] x V] x M']}.
// Missing bodies (M' < M) are zero-filled.
inline SkeletonFrame parse_frame(const std::string& line, std::size_t C, std::size_t V, std::size_t M) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("frame is not a JSON object");
    if (!j.contains("t") || !j["t"].is_number_integer()) throw FormatError("missing integer field 't'");
    if (!j.contains("bodies") || !j["bodies"].is_array()) throw FormatError("missing array field 'bodies'");
    const auto& bodies = j["bodies"];
    if (bodies.size() > M) {
        throw FormatError("frame has " + std::to_string(bodies.size()) + " bodies, stream expects at most " +
                          std::to_string(M));
    }
    SkeletonFrame f{j["t"].get<long long>(), Tensor({C, V, M})};
    for (std::size_t m = 0; m < bodies.size(); ++m) {
        const auto& body = bodies[m];
        if (!body.is_array() || body.size() != V) {
            throw FormatError("body " + std::to_string(m) + " must list exactly " + std::to_string(V) + " joints");
        }
        for (std::size_t v = 0; v < V; ++v) {
            const auto& joint = body[v];
            if (!joint.is_array() || joint.size() != C) {
                throw FormatError("body " + std::to_string(m) + " joint " + std::to_string(v) + " must have " +
                                  std::to_string(C) + " coordinates");
            }
            for (std::size_t c = 0; c < C; ++c) {
                if (!joint[c].is_number()) throw FormatError("non-numeric coordinate at joint " + std::to_string(v));
                const float x = joint[c].get<float>();
                if (!std::isfinite(x)) throw FormatError("non-finite coordinate at joint " + std::to_string(v));
                f.data(c, v, m) = x;
            }
        }
    }
    return f;
}

inline std::string frame_to_json(const Tensor& frame, long long t) {
    const std::size_t C = frame.dim(0), V = frame.dim(1), M = frame.dim(2);
    nlohmann::json bodies = nlohmann::json::array();
    for (std::size_t m = 0; m < M; ++m) {
        nlohmann::json body = nlohmann::json::array();
        for (std::size_t v = 0; v < V; ++v) {
            nlohmann::json joint = nlohmann::json::array();
            for (std::size_t c = 0; c < C; ++c) joint.push_back(frame(c, v, m));
            body.push_back(std::move(joint));
        }
        bodies.push_back(std::move(body));
    }
    return nlohmann::json{{"t", t}, {"bodies", bodies}}.dump();
}

// Pulls frames from a JSON-lines source. Blank lines are ignored; malformed
// lines are skipped and counted; the first kMaxWarnings are described in warnings().
class FrameReader {
public:
    static constexpr std::size_t kMaxWarnings = 100;

    FrameReader(std::istream& in, std::size_t channels, std::size_t joints, std::size_t persons)
        : in_(in), C_(channels), V_(joints), M_(persons) {}

    std::optional<SkeletonFrame> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                return parse_frame(line, C_, V_, M_);
            } catch (const FormatError& e) {
                ++skipped_;
                if (warnings_.size() < kMaxWarnings) warnings_.push_back("line " + std::to_string(line_no_) + ": " + e.what());
            }
        }
        return std::nullopt;
    }

    std::size_t skipped() const { return skipped_; }
    std::size_t lines_read() const { return line_no_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    std::istream& in_;
    std::size_t C_, V_, M_;
    std::size_t line_no_ = 0;
    std::size_t skipped_ = 0;
    std::vector<std::string> warnings_;
};

}  // namespace costgcn

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "levdec/errors.hpp"

namespace levdec {

using TokenId = std::int32_t;

// Reserved ids, fixed and distinct. Content tokens start at kNumReserved.
inline constexpr TokenId kBos = 0;  // <s>
inline constexpr TokenId kEos = 1;  // </s>
inline constexpr TokenId kPld = 2;  // <pld>
inline constexpr TokenId kUnk = 3;  // <unk>
inline constexpr TokenId kNumReserved = 4;

// Maximum insertion count the placeholder head can express per gap.
inline constexpr int kMaxInsert = 255;

inline constexpr std::string_view kContinuationMarker = "@@";

inline bool surface_continues(std::string_view surface) {
  return surface.size() >= kContinuationMarker.size() &&
         surface.substr(surface.size() - kContinuationMarker.size()) == kContinuationMarker;
}

// Surface-form <-> token-id bijection with dense ids 0..size()-1.
class Vocab {
public:
  Vocab() {
    add("<s>");
    add("</s>");
    add("<pld>");
    add("<unk>");
  }

  // Adds a surface if absent; returns its id either way.
  TokenId add(const std::string& surface) {
    auto it = id_of_.find(surface);
    if (it != id_of_.end()) return it->second;
    const TokenId id = static_cast<TokenId>(surfaces_.size());
    surfaces_.push_back(surface);
    continues_.push_back(surface_continues(surface));
    id_of_.emplace(surface, id);
    return id;
  }

  // Id of a surface, or kUnk when absent.
  TokenId id_of(std::string_view surface) const {
    auto it = id_of_.find(std::string(surface));
    return it == id_of_.end() ? kUnk : it->second;
  }

  bool contains(std::string_view surface) const {
    return id_of_.find(std::string(surface)) != id_of_.end();
  }

  const std::string& surface_of(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= surfaces_.size()) {
      throw ContractError("Vocab::surface_of: id out of range");
    }
    return surfaces_[static_cast<std::size_t>(id)];
  }

  // Whether the surface of `id` carries the continuation marker.
  bool continues(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= continues_.size()) {
      throw ContractError("Vocab::continues: id out of range");
    }
    return continues_[static_cast<std::size_t>(id)] != 0;
  }

  std::size_t size() const { return surfaces_.size(); }

private:
  std::vector<std::string> surfaces_;
  std::vector<std::uint8_t> continues_;
  std::unordered_map<std::string, TokenId> id_of_;
};

}  // namespace levdec

#pragma once
// Subgraph stream format and lazy reader.
//
// Streams are UTF-8 text: atoms one per line as `pred(c1,c2,...)`, blocks
// separated by a line containing exactly `---`, `#` starts a comment.
// Constants are bare tokens, typed by the argument position they fill. A
// block-level `?hide pred` directive marks a target predicate's atoms as
// the query set of that subgraph: its listed atoms are ground-truth labels
// and are masked at inference time.

#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "resolwe/logic.hpp"

namespace resolwe {

struct StreamBlock {
  SubgraphDatabase db;
  std::vector<int> hiddenPredicates;
  long ordinal = 0;
};

/// Pulls one block at a time; memory use stays bounded by the largest
/// single subgraph no matter how long the stream is.
class StreamReader {
 public:
  StreamReader(SchemaPtr schema, std::istream& in) : schema_(std::move(schema)), in_(&in) {}

  StreamReader(SchemaPtr schema, const std::string& path)
      : schema_(std::move(schema)), owned_(std::make_unique<std::ifstream>(path)) {
    if (!*owned_) throw Error("cannot open stream file " + path);
    in_ = owned_.get();
  }

  std::optional<StreamBlock> next() {
    StreamBlock block{SubgraphDatabase(schema_), {}, ordinal_};
    bool sawContent = false;
    std::string raw;
    while (std::getline(*in_, raw)) {
      ++lineNo_;
      std::string_view line = trim(raw);
      if (line.empty() || line[0] == '#') continue;
      if (line == "---") {
        ++ordinal_;
        return block;
      }
      parseLine(line, block);
      sawContent = true;
    }
    if (sawContent) {
      ++ordinal_;
      return block;
    }
    return std::nullopt;
  }

  // Advances past n blocks without building databases (separator scan
  // only). Returns how many were actually skipped.
  long skipBlocks(long n) {
    long skipped = 0;
    std::string raw;
    bool sawContent = false;
    while (skipped < n && std::getline(*in_, raw)) {
      ++lineNo_;
      std::string_view line = trim(raw);
      if (line.empty() || line[0] == '#') continue;
      if (line == "---") {
        ++skipped;
        ++ordinal_;
        sawContent = false;
      } else {
        sawContent = true;
      }
    }
    if (skipped < n && sawContent) {
      ++skipped;
      ++ordinal_;
    }
    return skipped;
  }

  long blocksRead() const { return ordinal_; }

 private:
  static std::string_view trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error("stream block " + std::to_string(ordinal_) + ", line " +
                std::to_string(lineNo_) + ": " + msg);
  }

  void parseLine(std::string_view line, StreamBlock& block) {
    if (line.rfind("?hide", 0) == 0) {
      std::string_view pred = trim(line.substr(5));
      if (pred.empty()) fail("?hide needs a predicate name");
      int p = schema_->predicateId(pred);
      if (p < 0) fail("unknown predicate " + std::string(pred));
      if (schema_->predicate(p).role != PredicateRole::Target)
        fail("?hide applies to target predicates; " + std::string(pred) + " is evidence");
      block.hiddenPredicates.push_back(p);
      return;
    }
    std::string_view content = line;
    auto hash = content.find('#');
    if (hash != std::string_view::npos) content = trim(content.substr(0, hash));
    auto open = content.find('(');
    if (open == std::string_view::npos || content.back() != ')')
      fail("malformed atom line '" + std::string(line) + "'");
    std::string_view pred = trim(content.substr(0, open));
    int p = schema_->predicateId(pred);
    if (p < 0) fail("unknown predicate " + std::string(pred));
    args_.clear();
    std::string_view inner = content.substr(open + 1, content.size() - open - 2);
    size_t start = 0;
    while (true) {
      size_t comma = inner.find(',', start);
      std::string_view tok = trim(comma == std::string_view::npos
                                      ? inner.substr(start)
                                      : inner.substr(start, comma - start));
      if (tok.empty()) fail("empty constant in atom line '" + std::string(line) + "'");
      args_.push_back(tok);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (static_cast<int>(args_.size()) != schema_->predicate(p).arity())
      fail("arity mismatch for " + std::string(pred));
    block.db.addAtomViews(p, args_);
  }

  SchemaPtr schema_;
  std::istream* in_ = nullptr;
  std::unique_ptr<std::ifstream> owned_;
  std::vector<std::string_view> args_;  // scratch, reused per atom line
  long ordinal_ = 0;
  long lineNo_ = 0;
};

inline void writeBlock(std::ostream& out, const SubgraphDatabase& db,
                       const std::vector<int>& hiddenPredicates = {}) {
  for (int p : hiddenPredicates) out << "?hide " << db.schema().predicate(p).name << "\n";
  for (int p = 0; p < db.schema().predicateCount(); ++p) {
    for (const auto& tuple : db.tuples(p)) {
      out << db.schema().predicate(p).name << "(";
      for (size_t i = 0; i < tuple.size(); ++i)
        out << (i ? "," : "") << db.constantName(tuple[i]);
      out << ")\n";
    }
  }
  out << "---\n";
}

/// Materializes a whole stream; test and tooling convenience, not the
/// streaming path.
inline std::vector<StreamBlock> readAllBlocks(const SchemaPtr& schema, std::istream& in) {
  StreamReader reader(schema, in);
  std::vector<StreamBlock> out;
  while (auto b = reader.next()) out.push_back(std::move(*b));
  return out;
}

}  // namespace resolwe

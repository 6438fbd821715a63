// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include "phrasebias/anchor_extract.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <unordered_map>

#include <json.hpp>

#include "phrasebias/error.hpp"
#include "phrasebias/text_util.hpp"

namespace phrasebias {

AnchorFilterRules AnchorFilterRules::defaults() {
  AnchorFilterRules rules;
  rules.excluded_namespaces = {"file",  "image",   "media",     "category", "template", "help",
                               "wikipedia", "wp", "portal", "special", "talk", "user",
                               "user talk", "module", "draft", "mediawiki", "timedtext", "book",
                               "wikt", "wiktionary"};
  rules.excluded_surfaces = {"edit",    "citation needed", "isbn",     "doi",     "pmid",
                             "issn",    "archived",        "retrieved", "see also", "main article",
                             "references", "external links", "v",      "t",        "e"};
  return rules;
}

namespace {

[[noreturn]] void parse_error(std::string_view doc, std::size_t offset, std::string_view page,
                              const std::string& what) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < doc.size(); ++i) {
    if (doc[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  fail(ErrorKind::kParse, std::string(page) + ":" + std::to_string(line) + ":" + std::to_string(col) +
                              ": " + what);
}

bool starts_with_ci(std::string_view text, std::size_t at, std::string_view prefix) {
  if (at + prefix.size() > text.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(text[at + i])) != prefix[i]) return false;
  return true;
}

bool contains_ci(const std::vector<std::string>& list, std::string_view value) {
  const auto lowered = to_lower_ascii(value);
  return std::find(list.begin(), list.end(), lowered) != list.end();
}

// "de:Graphentheorie", "zh-yue:...", "simple:..."
bool looks_interlanguage(std::string_view prefix) {
  if (prefix == "simple") return true;
  if (prefix.size() < 2 || prefix.size() > 12) return false;
  auto dash = prefix.find('-');
  const auto head = prefix.substr(0, dash);
  if (head.size() < 2 || head.size() > 3) return false;
  return std::all_of(prefix.begin(), prefix.end(),
                     [](char c) { return (c >= 'a' && c <= 'z') || c == '-'; });
}

class Collector {
 public:
  Collector(std::string_view page, const AnchorFilterRules& rules) : page_(page), rules_(rules) {}

  void add(std::string_view raw) {
    std::string surface = normalize_whitespace(raw);
    if (surface.empty()) return;
    if (static_cast<int>(split_whitespace(surface).size()) > kMaxPhraseWords) return;
    if (contains_ci(rules_.excluded_surfaces, surface)) return;
    auto [it, inserted] = index_.try_emplace(surface, out_.size());
    if (inserted) out_.push_back({surface, std::string(page_), 1});
    else ++out_[it->second].anchor_count;
  }

  // Applies the target-based rules shared by both dialects.
  bool target_allowed(std::string_view target) const {
    const std::string trimmed = trim(target);
    target = trimmed;
    if (target.empty()) return false;
    if (target.front() == '#') return !rules_.skip_section_links;
    if (target.front() == ':') target.remove_prefix(1);
    auto colon = target.find(':');
    if (colon != std::string_view::npos) {
      auto prefix = trim(target.substr(0, colon));
      std::replace(prefix.begin(), prefix.end(), '_', ' ');
      if (contains_ci(rules_.excluded_namespaces, prefix)) return false;
      if (rules_.skip_interlanguage_links && looks_interlanguage(prefix)) return false;
    }
    return true;
  }

  std::vector<CandidatePhrase> take() { return std::move(out_); }

 private:
  std::string_view page_;
  const AnchorFilterRules& rules_;
  std::vector<CandidatePhrase> out_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::string strip_wiki_emphasis(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\'' && i + 1 < text.size() && text[i + 1] == '\'') {
      while (i + 1 < text.size() && text[i + 1] == '\'') ++i;
      continue;
    }
    out += text[i];
  }
  return out;
}

std::size_t skip_comment(std::string_view doc, std::size_t i, std::string_view page) {
  auto end = doc.find("-->", i + 4);
  if (end == std::string_view::npos) parse_error(doc, i, page, "unterminated comment");
  return end + 3;
}

std::vector<CandidatePhrase> extract_wikitext(std::string_view doc, std::string_view page,
                                              const AnchorFilterRules& rules) {
  Collector collect(page, rules);
  std::vector<std::size_t> templates;  // offsets of open "{{"
  int ref_depth = 0;
  std::size_t ref_open = 0;
  std::size_t i = 0;
  while (i < doc.size()) {
    if (doc.compare(i, 4, "<!--") == 0) {
      i = skip_comment(doc, i, page);
      continue;
    }
    if (starts_with_ci(doc, i, "<nowiki>")) {
      auto end = doc.find("</nowiki>", i);
      if (end == std::string_view::npos) parse_error(doc, i, page, "unterminated <nowiki>");
      i = end + 9;
      continue;
    }
    if (starts_with_ci(doc, i, "<ref") && i + 4 < doc.size() &&
        (doc[i + 4] == '>' || doc[i + 4] == ' ' || doc[i + 4] == '/')) {
      auto close = doc.find('>', i);
      if (close == std::string_view::npos) parse_error(doc, i, page, "unterminated <ref> tag");
      if (doc[close - 1] != '/') {
        if (ref_depth++ == 0) ref_open = i;
      }
      i = close + 1;
      continue;
    }
    if (starts_with_ci(doc, i, "</ref>")) {
      if (ref_depth > 0) --ref_depth;
      i += 6;
      continue;
    }
    if (doc.compare(i, 2, "{{") == 0) {
      templates.push_back(i);
      i += 2;
      continue;
    }
    if (doc.compare(i, 2, "}}") == 0 && !templates.empty()) {
      templates.pop_back();
      i += 2;
      continue;
    }
    if (doc.compare(i, 2, "[[") == 0) {
      // Find the matching "]]", allowing nested links inside file captions.
      int depth = 0;
      std::size_t j = i;
      std::size_t close = std::string_view::npos;
      while (j + 1 < doc.size()) {
        if (doc.compare(j, 2, "[[") == 0) {
          ++depth;
          j += 2;
        } else if (doc.compare(j, 2, "]]") == 0) {
          if (--depth == 0) {
            close = j;
            break;
          }
          j += 2;
        } else {
          ++j;
        }
      }
      if (close == std::string_view::npos) parse_error(doc, i, page, "unterminated link");
      const auto inner = doc.substr(i + 2, close - i - 2);
      std::size_t next = close + 2;
      // Trailing letters join the anchor: [[dance]]s -> "dances".
      std::size_t tail = next;
      while (tail < doc.size() && std::isalpha(static_cast<unsigned char>(doc[tail]))) ++tail;

      const bool suppressed = (rules.skip_inside_templates && !templates.empty()) ||
                              (rules.skip_inside_references && ref_depth > 0);
      const auto pipe = inner.find('|');
      const auto target = inner.substr(0, pipe);
      if (!suppressed && inner.find("[[") == std::string_view::npos && collect.target_allowed(target)) {
        std::string anchor(pipe == std::string_view::npos ? target : inner.substr(pipe + 1));
        anchor += std::string(doc.substr(next, tail - next));
        collect.add(strip_wiki_emphasis(anchor));
      }
      i = tail;
      continue;
    }
    ++i;
  }
  if (!templates.empty()) parse_error(doc, templates.back(), page, "unterminated template");
  if (ref_depth > 0) parse_error(doc, ref_open, page, "unterminated <ref>");
  return collect.take();
}

void append_utf8(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Named references: the markup basics plus the Latin-1 letters seen in titles.
const std::map<std::string, unsigned long, std::less<>>& named_entities() {
  static const auto table = [] {
    std::map<std::string, unsigned long, std::less<>> t = {
        {"amp", '&'},      {"lt", '<'},       {"gt", '>'},       {"quot", '"'},
        {"apos", '\''},    {"nbsp", ' '},     {"ndash", 0x2013}, {"mdash", 0x2014},
        {"lsquo", 0x2018}, {"rsquo", 0x2019}, {"ldquo", 0x201C}, {"rdquo", 0x201D},
        {"szlig", 0xDF},   {"eth", 0xF0},     {"ETH", 0xD0},     {"thorn", 0xFE},
        {"THORN", 0xDE},   {"aelig", 0xE6},   {"AElig", 0xC6},   {"oslash", 0xF8},
        {"Oslash", 0xD8},  {"ccedil", 0xE7},  {"Ccedil", 0xC7},  {"ntilde", 0xF1},
        {"Ntilde", 0xD1},  {"aring", 0xE5},   {"Aring", 0xC5}};
    // Accented vowels follow the Latin-1 layout: base offset plus accent column.
    const struct { char lower; unsigned long upper_cp; } vowels[] = {
        {'a', 0xC0}, {'e', 0xC8}, {'i', 0xCC}, {'o', 0xD2}, {'u', 0xD9}};
    for (const auto& v : vowels) {
      const char up = static_cast<char>(v.lower - 'a' + 'A');
      const bool is_o = v.lower == 'o';
      const bool has_tilde = v.lower == 'a' || is_o;
      unsigned long cp = v.upper_cp;
      auto put = [&](const char* accent, unsigned long code) {
        t[std::string(1, up) + accent] = code;
        t[std::string(1, v.lower) + accent] = code + 0x20;
      };
      put("grave", cp++);
      put("acute", cp++);
      put("circ", cp++);
      if (has_tilde) put("tilde", cp++);
      put("uml", cp);
    }
    return t;
  }();
  return table;
}

std::string decode_entities(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '&') {
      out += text[i];
      continue;
    }
    auto semi = text.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out += '&';
      continue;
    }
    auto name = text.substr(i + 1, semi - i - 1);
    if (!name.empty() && name[0] == '#') {
      unsigned long cp = 0;
      try {
        cp = name.size() > 1 && (name[1] == 'x' || name[1] == 'X')
                 ? std::stoul(std::string(name.substr(2)), nullptr, 16)
                 : std::stoul(std::string(name.substr(1)));
      } catch (const std::exception&) {
        out += '&';
        continue;
      }
      append_utf8(out, cp);
      i = semi;
      continue;
    }
    const auto& named = named_entities();
    auto it = named.find(name);
    if (it == named.end()) {
      out += '&';
      continue;
    }
    append_utf8(out, it->second);
    i = semi;
  }
  return out;
}

struct Tag {
  std::string name;  // lowercase, without '/'
  bool closing = false;
  bool self_closing = false;
  std::map<std::string, std::string> attrs;
};

Tag parse_tag(std::string_view body) {
  Tag tag;
  std::size_t i = 0;
  if (i < body.size() && body[i] == '/') {
    tag.closing = true;
    ++i;
  }
  auto name_end = body.find_first_of(" \t\r\n/", i);
  tag.name = to_lower_ascii(body.substr(i, name_end == std::string_view::npos ? body.size() - i : name_end - i));
  if (!body.empty() && body.back() == '/') tag.self_closing = true;
  i = name_end == std::string_view::npos ? body.size() : name_end;
  while (i < body.size()) {
    while (i < body.size() && (std::isspace(static_cast<unsigned char>(body[i])) || body[i] == '/')) ++i;
    auto key_end = body.find_first_of("= \t\r\n/", i);
    if (key_end == std::string_view::npos) key_end = body.size();
    if (key_end == i) break;
    std::string key = to_lower_ascii(body.substr(i, key_end - i));
    i = key_end;
    std::string value;
    if (i < body.size() && body[i] == '=') {
      ++i;
      if (i < body.size() && (body[i] == '"' || body[i] == '\'')) {
        const char quote = body[i];
        auto end = body.find(quote, i + 1);
        if (end == std::string_view::npos) end = body.size();
        value = std::string(body.substr(i + 1, end - i - 1));
        i = end + 1;
      } else {
        auto end = body.find_first_of(" \t\r\n", i);
        if (end == std::string_view::npos) end = body.size();
        value = std::string(body.substr(i, end - i));
        i = end;
      }
    }
    tag.attrs[key] = decode_entities(value);
  }
  return tag;
}

bool is_void_element(const std::string& name) {
  static const char* kVoid[] = {"area", "base", "br", "col", "embed", "hr", "img", "input",
                                "link", "meta", "param", "source", "track", "wbr", "!doctype"};
  return std::any_of(std::begin(kVoid), std::end(kVoid), [&](const char* v) { return name == v; });
}

bool has_class(const Tag& tag, std::string_view fragment) {
  auto it = tag.attrs.find("class");
  return it != tag.attrs.end() && it->second.find(fragment) != std::string::npos;
}

// Title of an article href, or empty when the link leaves the encyclopedia.
std::optional<std::string> article_title(const std::string& href) {
  if (href.empty()) return std::nullopt;
  if (href[0] == '#') return href;
  std::string_view h = href;
  for (std::string_view prefix : {"https://", "http://", "//"}) {
    if (h.substr(0, prefix.size()) == prefix) {
      auto wiki = h.find("/wiki/");
      if (wiki == std::string_view::npos || h.find("wikipedia.org") == std::string_view::npos)
        return std::nullopt;
      h = h.substr(wiki);
      break;
    }
  }
  if (h.substr(0, 6) == "/wiki/") h.remove_prefix(6);
  else if (h.substr(0, 2) == "./") h.remove_prefix(2);
  else if (h.find(':') != std::string_view::npos && h.find('/') == std::string_view::npos) {
    // relative "File:X.png"
  } else if (h.front() == '/') {
    return std::nullopt;
  }
  std::string title(h.substr(0, h.find('#')));
  std::replace(title.begin(), title.end(), '_', ' ');
  return title;
}

std::vector<CandidatePhrase> extract_html(std::string_view doc, std::string_view page,
                                          const AnchorFilterRules& rules) {
  Collector collect(page, rules);
  struct Open {
    std::string name;
    bool suppress;
  };
  std::vector<Open> stack;
  auto suppressed = [&] { return !stack.empty() && stack.back().suppress; };

  std::size_t i = 0;
  while (i < doc.size()) {
    if (doc.compare(i, 4, "<!--") == 0) {
      i = skip_comment(doc, i, page);
      continue;
    }
    if (doc[i] != '<') {
      ++i;
      continue;
    }
    auto close = doc.find('>', i);
    if (close == std::string_view::npos) parse_error(doc, i, page, "unterminated tag");
    const auto body = doc.substr(i + 1, close - i - 1);
    if (body.empty() || std::isspace(static_cast<unsigned char>(body[0]))) {
      ++i;
      continue;
    }
    Tag tag = parse_tag(body);
    const std::size_t tag_start = i;
    i = close + 1;
    if (tag.name == "script" || tag.name == "style") {
      if (tag.closing || tag.self_closing) continue;
      auto end = doc.find("</" + tag.name, i);
      if (end == std::string_view::npos) parse_error(doc, tag_start, page, "unterminated <" + tag.name + ">");
      i = doc.find('>', end) + 1;
      continue;
    }
    if (tag.closing) {
      for (std::size_t k = stack.size(); k-- > 0;)
        if (stack[k].name == tag.name) {
          stack.resize(k);
          break;
        }
      continue;
    }
    if (tag.name == "a") {
      auto end = std::string_view::npos;
      for (std::size_t k = i; k < doc.size(); ++k)
        if (doc[k] == '<' && starts_with_ci(doc, k, "</a") &&
            (k + 3 < doc.size() && (doc[k + 3] == '>' || std::isspace(static_cast<unsigned char>(doc[k + 3]))))) {
          end = k;
          break;
        }
      if (end == std::string_view::npos) parse_error(doc, tag_start, page, "unterminated <a>");
      std::string text;
      for (std::size_t k = i; k < end; ++k) {
        if (doc[k] == '<') {
          auto gt = doc.find('>', k);
          if (gt == std::string_view::npos || gt > end) parse_error(doc, k, page, "unterminated tag");
          k = gt;
          text += ' ';
          continue;
        }
        text += doc[k];
      }
      i = doc.find('>', end) + 1;
      if (suppressed()) continue;
      if (rules.skip_interlanguage_links && (has_class(tag, "interlanguage") || tag.attrs.count("hreflang")))
        continue;
      auto href = tag.attrs.find("href");
      if (href == tag.attrs.end()) continue;
      auto title = article_title(href->second);
      if (!title || !collect.target_allowed(*title)) continue;
      collect.add(decode_entities(text));
      continue;
    }
    if (tag.self_closing || is_void_element(tag.name)) continue;
    bool suppress = suppressed();
    if (rules.skip_inside_templates &&
        (tag.name == "nav" || has_class(tag, "navbox") || has_class(tag, "infobox-navbar") ||
         has_class(tag, "mw-editsection") || has_class(tag, "hatnote")))
      suppress = true;
    if (rules.skip_inside_references &&
        ((tag.name == "sup" && has_class(tag, "reference")) || has_class(tag, "reflist") ||
         has_class(tag, "references")))
      suppress = true;
    stack.push_back({tag.name, suppress});
  }
  return collect.take();
}

std::string lower_extension(const std::filesystem::path& p) { return to_lower_ascii(p.extension().string()); }

}  // namespace

std::vector<CandidatePhrase> extract_anchor_phrases(std::string_view document, MarkupDialect dialect,
                                                    std::string_view source_page,
                                                    const AnchorFilterRules& rules) {
  AnchorFilterRules normalized = rules;
  for (auto& n : normalized.excluded_namespaces) n = to_lower_ascii(n);
  for (auto& s : normalized.excluded_surfaces) s = to_lower_ascii(s);
  return dialect == MarkupDialect::kHtml ? extract_html(document, source_page, normalized)
                                         : extract_wikitext(document, source_page, normalized);
}

std::vector<CandidatePhrase> extract_anchor_phrases_from_file(const std::filesystem::path& path,
                                                              const AnchorFilterRules& rules) {
  const auto ext = lower_extension(path);
  const auto dialect = (ext == ".html" || ext == ".htm") ? MarkupDialect::kHtml : MarkupDialect::kWikitext;
  return extract_anchor_phrases(read_file(path), dialect, path.stem().string(), rules);
}

std::vector<CandidatePhrase> merge_candidates(std::span<const std::vector<CandidatePhrase>> parts) {
  std::map<std::string, CandidatePhrase> merged;
  for (const auto& part : parts)
    for (const auto& c : part) {
      auto [it, inserted] = merged.try_emplace(c.surface, c);
      if (inserted) continue;
      it->second.anchor_count += c.anchor_count;
      if (c.source_page < it->second.source_page) it->second.source_page = c.source_page;
    }
  std::vector<CandidatePhrase> out;
  out.reserve(merged.size());
  for (auto& [_, c] : merged) out.push_back(std::move(c));
  return out;
}

std::vector<std::filesystem::path> list_page_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorKind::kConfig, "page corpus " + dir.string() + " is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = lower_extension(entry.path());
    if (ext == ".wiki" || ext == ".txt" || ext == ".html" || ext == ".htm") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_candidates_jsonl(const std::filesystem::path& path, std::span<const CandidatePhrase> candidates) {
  std::string out;
  for (const auto& c : candidates)
    out += nlohmann::json{{"surface", c.surface}, {"source_page", c.source_page}, {"anchor_count", c.anchor_count}}
               .dump() +
           "\n";
  write_file(path, out);
}

std::vector<CandidatePhrase> read_candidates_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kDependency, "cannot open " + path.string());
  std::vector<CandidatePhrase> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      CandidatePhrase c{j.at("surface").get<std::string>(), j.at("source_page").get<std::string>(),
                        j.at("anchor_count").get<int>()};
      if (trim(c.surface).empty() || c.anchor_count < 1)
        fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(number) + ": invalid candidate");
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace phrasebias

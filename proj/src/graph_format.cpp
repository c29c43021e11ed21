// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include "pcgraph/graph_format.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "pcgraph/errors.hpp"

namespace pcg {

namespace {

struct Token {
  std::string_view text;
  std::size_t offset = 0;
};

std::vector<Token> split_words(std::string_view line, std::size_t base) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back({line.substr(start, i - start), base + start});
  }
  return out;
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

std::size_t parse_count(const Token& t, std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError("expected a nonnegative integer, got '" + std::string(s) + "'", t.offset);
  }
  return v;
}

Shape parse_shape(const Token& t, std::string_view s) {
  Shape shape;
  std::size_t start = 0;
  for (;;) {
    const std::size_t x = s.find('x', start);
    shape.push_back(parse_count(t, s.substr(start, x == std::string_view::npos ? x : x - start)));
    if (x == std::string_view::npos) break;
    start = x + 1;
  }
  return shape;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t c = s.find(',', start);
    out.push_back(s.substr(start, c == std::string_view::npos ? c : c - start));
    if (c == std::string_view::npos) break;
    start = c + 1;
  }
  return out;
}

double parse_real(const Token& t, std::string_view s) {
  std::string copy(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(copy, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != copy.size() || copy.empty()) {
    throw ParseError("expected a number, got '" + copy + "'", t.offset);
  }
  return v;
}

using Attributes = std::map<std::string, Token>;

Attributes parse_attributes(const std::vector<Token>& words, std::size_t first,
                            std::initializer_list<std::string_view> allowed) {
  Attributes attrs;
  for (std::size_t i = first; i < words.size(); ++i) {
    const Token& w = words[i];
    const std::size_t eq = w.text.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ParseError("expected key=value, got '" + std::string(w.text) + "'", w.offset);
    }
    const std::string key(w.text.substr(0, eq));
    bool known = false;
    for (std::string_view a : allowed) known = known || a == key;
    if (!known) throw ParseError("unknown attribute '" + key + "'", w.offset);
    if (attrs.count(key)) throw ParseError("duplicate attribute '" + key + "'", w.offset);
    attrs[key] = Token{w.text.substr(eq + 1), w.offset + eq + 1};
  }
  return attrs;
}

}  // namespace

ComputationGraph parse_graph(std::string_view text) {
  std::vector<Vertex> vertices;
  std::vector<ParamDecl> params;
  std::map<std::string, std::size_t, std::less<>> vertex_ids;
  std::map<std::string, std::size_t, std::less<>> param_ids;
  std::optional<VertexId> output;
  Loss loss = Loss::mse;
  std::size_t block = 0;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const std::vector<Token> words = split_words(line, pos);
    pos = end + 1;
    if (words.empty()) continue;

    const Token& head = words[0];
    if (words.size() < 2) {
      throw ParseError("'" + std::string(head.text) + "' needs a name", head.offset);
    }
    const Token& name = words[1];
    if (head.text == "output") {
      if (output) throw ParseError("output declared twice", head.offset);
      const auto it = vertex_ids.find(name.text);
      if (it == vertex_ids.end()) {
        throw ParseError("unknown vertex '" + std::string(name.text) + "'", name.offset);
      }
      output = VertexId{it->second};
      Attributes a = parse_attributes(words, 2, {"loss", "block"});
      if (auto l = a.find("loss"); l != a.end()) {
        const auto parsed = parse_loss(std::string(l->second.text));
        if (!parsed) throw ParseError("unknown loss '" + std::string(l->second.text) + "'", l->second.offset);
        loss = *parsed;
      }
      if (auto b = a.find("block"); b != a.end()) block = parse_count(b->second, b->second.text);
      continue;
    }
    if (head.text != "vertex" && head.text != "param") {
      throw ParseError("expected 'vertex', 'param' or 'output', got '" +
                           std::string(head.text) + "'", head.offset);
    }
    if (!valid_name(name.text)) {
      throw ParseError("invalid name '" + std::string(name.text) + "'", name.offset);
    }

    if (head.text == "param") {
      Attributes a = parse_attributes(words, 2, {"shape"});
      const auto s = a.find("shape");
      if (s == a.end()) throw ParseError("param needs shape=", name.offset);
      if (param_ids.count(name.text)) {
        throw ParseError("duplicate param '" + std::string(name.text) + "'", name.offset);
      }
      param_ids.emplace(std::string(name.text), params.size());
      params.push_back({std::string(name.text), parse_shape(s->second, s->second.text)});
      continue;
    }

    Attributes a = parse_attributes(
        words, 2, {"shape", "edge", "parents", "params", "activation", "fn", "scale", "offset", "length"});
    const auto s = a.find("shape");
    if (s == a.end()) throw ParseError("vertex needs shape=", name.offset);
    if (vertex_ids.count(name.text)) {
      throw ParseError("duplicate vertex '" + std::string(name.text) + "'", name.offset);
    }
    Vertex v{std::string(name.text), parse_shape(s->second, s->second.text), std::nullopt};
    if (const auto e = a.find("edge"); e != a.end()) {
      EdgeFunction edge;
      const auto kind = parse_edge_kind(std::string(e->second.text));
      if (!kind) throw ParseError("unknown edge kind '" + std::string(e->second.text) + "'", e->second.offset);
      edge.kind = *kind;
      const auto p = a.find("parents");
      if (p == a.end()) throw ParseError("edge needs parents=", e->second.offset);
      for (std::string_view id : split_list(p->second.text)) {
        const auto it = vertex_ids.find(id);
        if (it == vertex_ids.end()) {
          throw ParseError("unknown parent '" + std::string(id) + "'", p->second.offset);
        }
        edge.parents.push_back(VertexId{it->second});
      }
      if (const auto q = a.find("params"); q != a.end()) {
        for (std::string_view id : split_list(q->second.text)) {
          const auto it = param_ids.find(id);
          if (it == param_ids.end()) {
            throw ParseError("unknown param '" + std::string(id) + "'", q->second.offset);
          }
          edge.params.push_back(ParamId{it->second});
        }
      }
      if (const auto t = a.find("activation"); t != a.end()) {
        const auto act = parse_activation(std::string(t->second.text));
        if (!act) throw ParseError("unknown activation '" + std::string(t->second.text) + "'", t->second.offset);
        edge.activation = *act;
      }
      if (const auto t = a.find("fn"); t != a.end()) {
        const auto fn = parse_scalar_fn(std::string(t->second.text));
        if (!fn) throw ParseError("unknown function '" + std::string(t->second.text) + "'", t->second.offset);
        edge.fn = *fn;
      }
      if (const auto t = a.find("scale"); t != a.end()) edge.scale = parse_real(t->second, t->second.text);
      if (const auto t = a.find("offset"); t != a.end()) edge.offset = parse_count(t->second, t->second.text);
      if (const auto t = a.find("length"); t != a.end()) edge.length = parse_count(t->second, t->second.text);
      v.edge = std::move(edge);
    } else if (a.size() > 1) {
      throw ParseError("input vertex '" + v.name + "' takes only shape=", name.offset);
    }
    vertex_ids.emplace(v.name, vertices.size());
    vertices.push_back(std::move(v));
  }
  if (!output) throw ParseError("no output declared", text.size());
  ComputationGraph g(std::move(vertices), std::move(params), output, loss, block);
  require_valid(g);
  return g;
}

ComputationGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open graph file '" + path + "'", 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_graph(buf.str());
}

std::string format_graph(const ComputationGraph& g) {
  auto join_shape = [](const Shape& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out;
  };
  std::ostringstream out;
  for (const ParamDecl& p : g.params()) {
    out << "param " << p.name << " shape=" << join_shape(p.shape) << "\n";
  }
  for (const Vertex& v : g.vertices()) {
    out << "vertex " << v.name << " shape=" << join_shape(v.shape);
    if (v.edge) {
      const EdgeFunction& e = *v.edge;
      out << " edge=" << to_string(e.kind) << " parents=";
      for (std::size_t i = 0; i < e.parents.size(); ++i) {
        out << (i ? "," : "") << g.vertex(e.parents[i]).name;
      }
      if (!e.params.empty()) {
        out << " params=";
        for (std::size_t i = 0; i < e.params.size(); ++i) {
          out << (i ? "," : "") << g.param(e.params[i]).name;
        }
      }
      if (e.kind == EdgeKind::dense || e.kind == EdgeKind::conv2d ||
          e.kind == EdgeKind::nonlinearity) {
        out << " activation=" << to_string(e.activation);
      }
      if (e.kind == EdgeKind::scalar_fn) {
        out << " fn=" << to_string(e.fn);
        if (e.fn == ScalarFn::scale) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.17g", e.scale);
          out << " scale=" << buf;
        }
      }
      if (e.kind == EdgeKind::slice) out << " offset=" << e.offset << " length=" << e.length;
    }
    out << "\n";
  }
  out << "output " << g.vertex(g.output_vertex()).name << " loss=" << to_string(g.loss());
  if (g.loss_block()) out << " block=" << g.loss_block();
  out << "\n";
  return out.str();
}

}  // namespace pcg

#include "mdf/filter.hpp"

#include <algorithm>

#include "mdf/error.hpp"

namespace mdf {

namespace {

bool valid_prefix(std::string_view p) {
  if (p.empty() || p.size() > 17) return false;
  for (char c : p)
    if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.')) return false;
  return true;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

}  // namespace

bool SymbolSet::contains(const SymbolKey& k) const {
  return std::binary_search(symbols.begin(), symbols.end(), k);
}

SubscriptionFilter& SubscriptionFilter::source(std::string s) {
  if (!is_valid_source(s)) throw Error("invalid source '" + s + "' in filter");
  source_ = std::move(s);
  return *this;
}

SubscriptionFilter& SubscriptionFilter::instrument_class(InstrumentClass c) {
  class_ = c;
  return *this;
}

SubscriptionFilter& SubscriptionFilter::event_types(EventTypeSet types) {
  if (types.empty()) throw Error("event type set must be non-empty");
  if (types.mask() == EventTypeSet::kAll)
    types_.reset();
  else
    types_ = types;
  return *this;
}

SubscriptionFilter& SubscriptionFilter::symbols(std::vector<SymbolKey> syms) {
  if (syms.empty()) throw Error("symbol set must be non-empty");
  std::sort(syms.begin(), syms.end());
  syms.erase(std::unique(syms.begin(), syms.end()), syms.end());
  selector_ = SymbolSet{std::move(syms)};
  return *this;
}

SubscriptionFilter& SubscriptionFilter::symbol_prefix(std::string prefix) {
  if (!valid_prefix(prefix)) throw Error("invalid symbol prefix '" + prefix + "'");
  selector_ = SymbolPrefix{std::move(prefix)};
  return *this;
}

bool SubscriptionFilter::is_wildcard() const {
  return !source_ && !class_ && !types_ && std::holds_alternative<std::monostate>(selector_);
}

bool filter_matches(const SubscriptionFilter& f, const EventNotification& n) {
  if (f.source() && *f.source() != n.source) return false;
  if (f.instrument_class() && f.instrument_class() != n.instrument_class) return false;
  if (f.event_types() && !f.event_types()->contains(n.event_type)) return false;
  if (auto* set = f.symbol_set()) return set->contains(n.symbol);
  if (auto* p = f.symbol_prefix()) return starts_with(n.symbol.str(), p->prefix);
  return true;
}

bool filter_covers(const SubscriptionFilter& a, const SubscriptionFilter& b) {
  if (a.source() && a.source() != b.source()) return false;
  if (a.instrument_class() && a.instrument_class() != b.instrument_class()) return false;
  if (a.event_types()) {
    EventTypeSet bt = b.event_types().value_or(EventTypeSet(EventTypeSet::kAll));
    if (!a.event_types()->includes(bt)) return false;
  }
  if (auto* aset = a.symbol_set()) {
    auto* bset = b.symbol_set();
    return bset && std::includes(aset->symbols.begin(), aset->symbols.end(),
                                 bset->symbols.begin(), bset->symbols.end());
  }
  if (auto* ap = a.symbol_prefix()) {
    if (auto* bp = b.symbol_prefix()) return starts_with(bp->prefix, ap->prefix);
    if (auto* bset = b.symbol_set())
      return std::all_of(bset->symbols.begin(), bset->symbols.end(),
                         [&](const SymbolKey& k) { return starts_with(k.str(), ap->prefix); });
    return false;
  }
  return true;
}

void encode_filter(const SubscriptionFilter& f, Bytes& out) {
  ByteWriter w(out);
  auto put_str = [&](std::uint8_t t, std::string_view s) {
    w.u8(t);
    w.str8(s);
  };
  if (f.source()) put_str(1, *f.source());
  if (f.instrument_class()) {
    w.u8(2);
    w.u8(1);
    w.u8(static_cast<std::uint8_t>(*f.instrument_class()));
  }
  if (f.event_types()) {
    w.u8(3);
    w.u8(1);
    w.u8(f.event_types()->mask());
  }
  if (auto* set = f.symbol_set())
    for (const auto& s : set->symbols) put_str(4, s.str());
  if (auto* p = f.symbol_prefix()) put_str(5, p->prefix);
}

Bytes encode_filter(const SubscriptionFilter& f) {
  Bytes out;
  encode_filter(f, out);
  return out;
}

SubscriptionFilter decode_filter(ByteSpan bytes) {
  SubscriptionFilter f;
  ByteReader r(bytes);
  std::vector<SymbolKey> syms;
  bool have_prefix = false;
  int last_tag = 0;
  while (!r.done()) {
    std::size_t at = r.offset();
    int t = r.u8();
    if (t < last_tag || (t == last_tag && t != 4))
      throw MalformedFrame("filter tags out of order", at, t);
    last_tag = t;
    auto value = r.take(r.u8());
    std::string s(value.begin(), value.end());
    try {
      switch (t) {
        case 1: f.source(s); break;
        case 2:
          if (value.size() != 1 || value[0] < 1 || value[0] > 4)
            throw MalformedFrame("bad class", at, t);
          f.instrument_class(static_cast<InstrumentClass>(value[0]));
          break;
        case 3:
          if (value.size() != 1 || (value[0] & ~EventTypeSet::kAll) || value[0] == 0)
            throw MalformedFrame("bad type mask", at, t);
          f.event_types(EventTypeSet(value[0]));
          break;
        case 4: {
          auto k = SymbolKey::parse(s);
          if (!k) throw MalformedFrame("bad symbol", at, t);
          syms.push_back(std::move(*k));
          break;
        }
        case 5:
          f.symbol_prefix(s);
          have_prefix = true;
          break;
        default: break;
      }
    } catch (const MalformedFrame&) {
      throw;
    } catch (const Error& e) {
      throw MalformedFrame(e.what(), at, t);
    }
  }
  if (!syms.empty()) {
    if (have_prefix) throw MalformedFrame("both symbol set and prefix", 0);
    f.symbols(std::move(syms));
  }
  return f;
}

bool canonical_less(const SubscriptionFilter& a, const SubscriptionFilter& b) {
  auto ea = encode_filter(a);
  auto eb = encode_filter(b);
  return std::lexicographical_compare(ea.begin(), ea.end(), eb.begin(), eb.end());
}

std::vector<SubscriptionFilter> merge_filters(std::vector<SubscriptionFilter> fs) {
  std::vector<std::pair<Bytes, SubscriptionFilter>> keyed;
  keyed.reserve(fs.size());
  for (auto& f : fs) keyed.emplace_back(encode_filter(f), std::move(f));
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  keyed.erase(std::unique(keyed.begin(), keyed.end(),
                          [](const auto& x, const auto& y) { return x.first == y.first; }),
              keyed.end());

  std::vector<SubscriptionFilter> out;
  const std::size_t n = keyed.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& fi = keyed[i].second;
    bool covered = false;
    for (std::size_t j = 0; j < n && !covered; ++j) {
      if (j == i) continue;
      const auto& fj = keyed[j].second;
      if (filter_covers(fj, fi) && (j < i || !filter_covers(fi, fj))) covered = true;
    }
    if (!covered) out.push_back(fi);
  }
  return out;
}

SubscriptionFilter parse_filter_expr(std::string_view text) {
  SubscriptionFilter f;
  bool seen_source = false, seen_class = false, seen_type = false, seen_symbol = false,
       seen_prefix = false;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == ' ') {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size() && text[i] != ' ') ++i;
    std::string_view token = text.substr(start, i - start);
    auto eq = token.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw ParseError("expected key=value", start);
    std::string_view key = token.substr(0, eq);
    std::string_view value = token.substr(eq + 1);
    std::size_t vpos = start + eq + 1;
    if (value.empty()) throw ParseError("empty value for '" + std::string(key) + "'", vpos);

    auto once = [&](bool& flag) {
      if (flag) throw ParseError("duplicate key '" + std::string(key) + "'", start);
      flag = true;
    };
    auto split = [&](auto&& each) {
      std::size_t p = 0;
      while (p <= value.size()) {
        auto comma = value.find(',', p);
        if (comma == std::string_view::npos) comma = value.size();
        auto item = value.substr(p, comma - p);
        if (item.empty()) throw ParseError("empty list item", vpos + p);
        each(item, vpos + p);
        p = comma + 1;
      }
    };

    if (key == "source") {
      once(seen_source);
      if (!is_valid_source(value)) throw ParseError("invalid source", vpos);
      f.source(std::string(value));
    } else if (key == "class") {
      once(seen_class);
      auto c = parse_instrument_class(value);
      if (!c) throw ParseError("unknown instrument class", vpos);
      f.instrument_class(*c);
    } else if (key == "type") {
      once(seen_type);
      std::uint8_t mask = 0;
      split([&](std::string_view item, std::size_t pos) {
        auto t = parse_event_type(item);
        if (!t) throw ParseError("unknown event type", pos);
        mask |= EventTypeSet::of({*t}).mask();
      });
      f.event_types(EventTypeSet(mask));
    } else if (key == "symbol") {
      once(seen_symbol);
      if (seen_prefix) throw ParseError("symbol and prefix are mutually exclusive", start);
      std::vector<SymbolKey> syms;
      split([&](std::string_view item, std::size_t pos) {
        auto k = SymbolKey::parse(item);
        if (!k) throw ParseError("invalid symbol", pos);
        syms.push_back(std::move(*k));
      });
      f.symbols(std::move(syms));
    } else if (key == "prefix") {
      once(seen_prefix);
      if (seen_symbol) throw ParseError("symbol and prefix are mutually exclusive", start);
      if (!valid_prefix(value)) throw ParseError("invalid prefix", vpos);
      f.symbol_prefix(std::string(value));
    } else {
      throw ParseError("unknown key '" + std::string(key) + "'", start);
    }
  }
  return f;
}

std::string format_filter_expr(const SubscriptionFilter& f) {
  std::string out;
  auto sep = [&] {
    if (!out.empty()) out += ' ';
  };
  if (f.source()) {
    sep();
    out += "source=" + *f.source();
  }
  if (f.instrument_class()) {
    sep();
    out += "class=";
    out += to_string(*f.instrument_class());
  }
  if (f.event_types()) {
    sep();
    out += "type=";
    bool first = true;
    for (auto t : {EventType::Trade, EventType::Quote, EventType::Status}) {
      if (!f.event_types()->contains(t)) continue;
      if (!first) out += ',';
      out += to_string(t);
      first = false;
    }
  }
  if (auto* set = f.symbol_set()) {
    sep();
    out += "symbol=";
    for (std::size_t i = 0; i < set->symbols.size(); ++i) {
      if (i) out += ',';
      out += set->symbols[i].str();
    }
  }
  if (auto* p = f.symbol_prefix()) {
    sep();
    out += "prefix=" + p->prefix;
  }
  return out;
}

}  // namespace mdf

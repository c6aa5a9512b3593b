#include "lire/corpus.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "lire/error.hpp"
#include "lire/io.hpp"

namespace lire {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Calls fn(line_number, line) for every line of the file; blank lines are
// skipped. line numbers are 1-based.
template <typename Fn>
void for_each_line(const std::string& path, Fn&& fn) {
    std::ifstream f(path);
    if (!f) throw Error(Err::IoError, "cannot open " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim_whitespace(line).empty()) continue;
        fn(lineno, line);
    }
}

json parse_line(const std::string& path, size_t lineno, const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error(Err::MalformedLine, path + ":" + std::to_string(lineno) + ": not a JSON object");
    return j;
}

std::string get_string(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        throw Error(Err::MalformedLine, where + ": missing or non-string field '" + key + "'");
    return it->get<std::string>();
}

} // namespace

std::string trim_whitespace(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n\f\v");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n\f\v");
    return s.substr(b, e - b + 1);
}

const Document* Corpus::find(const std::string& doc_id) const {
    for (const auto& d : docs)
        if (d.doc_id == doc_id) return &d;
    return nullptr;
}

int Qrels::grade(const std::string& qid, const std::string& did) const {
    auto q = by_query.find(qid);
    if (q == by_query.end()) return 0;
    auto d = q->second.find(did);
    return d == q->second.end() ? 0 : d->second;
}

bool Qrels::has_relevant(const std::string& qid) const {
    auto q = by_query.find(qid);
    if (q == by_query.end()) return false;
    for (const auto& [_, g] : q->second)
        if (g > 0) return true;
    return false;
}

size_t Qrels::size() const {
    size_t n = 0;
    for (const auto& [_, m] : by_query) n += m.size();
    return n;
}

Corpus load_corpus(const std::string& path) {
    Corpus corpus;
    std::unordered_set<std::string> seen;
    for_each_line(path, [&](size_t lineno, const std::string& line) {
        std::string where = path + ":" + std::to_string(lineno);
        json j = parse_line(path, lineno, line);
        Document d;
        d.doc_id = get_string(j, "_id", where);
        if (j.contains("title")) d.title = get_string(j, "title", where);
        d.text = get_string(j, "text", where);
        if (d.doc_id.empty()) throw Error(Err::MalformedLine, where + ": empty _id");
        if (trim_whitespace(d.title + d.text).empty())
            throw Error(Err::EmptyText, where + ": document '" + d.doc_id + "' has no content");
        if (!seen.insert(d.doc_id).second)
            throw Error(Err::DuplicateId, where + ": '" + d.doc_id + "'");
        corpus.docs.push_back(std::move(d));
    });
    if (corpus.docs.empty()) throw Error(Err::EmptyCorpus, path);
    return corpus;
}

std::vector<Query> load_queries(const std::string& path) {
    std::vector<Query> queries;
    std::unordered_set<std::string> seen;
    for_each_line(path, [&](size_t lineno, const std::string& line) {
        std::string where = path + ":" + std::to_string(lineno);
        json j = parse_line(path, lineno, line);
        Query q;
        q.query_id = get_string(j, "_id", where);
        q.text = get_string(j, "text", where);
        if (q.query_id.empty()) throw Error(Err::MalformedLine, where + ": empty _id");
        if (trim_whitespace(q.text).empty())
            throw Error(Err::EmptyText, where + ": query '" + q.query_id + "' has empty text");
        if (!seen.insert(q.query_id).second)
            throw Error(Err::DuplicateId, where + ": '" + q.query_id + "'");
        queries.push_back(std::move(q));
    });
    if (queries.empty()) throw Error(Err::EmptyCorpus, path + ": no queries");
    return queries;
}

Qrels load_qrels(const std::string& path, Warnings* warnings) {
    Qrels qrels;
    for_each_line(path, [&](size_t lineno, const std::string& line) {
        std::string where = path + ":" + std::to_string(lineno);
        std::istringstream iss(line);
        std::string qid, iteration, did, grade_str;
        if (!(iss >> qid >> iteration >> did >> grade_str))
            throw Error(Err::MalformedLine, where + ": expected `qid iter did grade`");
        std::string extra;
        if (iss >> extra)
            throw Error(Err::MalformedLine, where + ": trailing fields");
        size_t consumed = 0;
        int grade;
        try {
            grade = std::stoi(grade_str, &consumed);
        } catch (const std::exception&) {
            throw Error(Err::MalformedLine, where + ": non-integer grade '" + grade_str + "'");
        }
        if (consumed != grade_str.size())
            throw Error(Err::MalformedLine, where + ": non-integer grade '" + grade_str + "'");
        if (grade < 0)
            throw Error(Err::NegativeGrade, where + ": grade " + std::to_string(grade));
        auto& m = qrels.by_query[qid];
        auto it = m.find(did);
        if (it != m.end()) {
            warn(where + ": duplicate judgment (" + qid + "," + did + "), last wins", warnings);
            it->second = grade;
        } else {
            m.emplace(did, grade);
        }
    });
    return qrels;
}

std::vector<PairExample> load_pairs(const std::string& path) {
    std::vector<PairExample> pairs;
    for_each_line(path, [&](size_t lineno, const std::string& line) {
        std::string where = path + ":" + std::to_string(lineno);
        json j = parse_line(path, lineno, line);
        PairExample p;
        p.left_text = get_string(j, "left", where);
        p.right_text = get_string(j, "right", where);
        if (p.left_text.empty() || p.right_text.empty())
            throw Error(Err::EmptyText, where + ": pair sides must be non-empty");
        pairs.push_back(std::move(p));
    });
    return pairs;
}

std::vector<TripletExample> load_triplets(const std::string& path) {
    std::vector<TripletExample> triplets;
    for_each_line(path, [&](size_t lineno, const std::string& line) {
        std::string where = path + ":" + std::to_string(lineno);
        json j = parse_line(path, lineno, line);
        TripletExample t;
        t.query_text = get_string(j, "query", where);
        t.positive = get_string(j, "positive", where);
        auto negs = j.find("negatives");
        if (negs == j.end() || !negs->is_array())
            throw Error(Err::MalformedLine, where + ": missing 'negatives' array");
        for (const auto& n : *negs) {
            if (!n.is_string()) throw Error(Err::MalformedLine, where + ": non-string negative");
            t.negatives.push_back(n.get<std::string>());
        }
        if (t.negatives.size() != kTripletNegatives)
            throw Error(Err::WrongNegativeCount,
                        where + ": " + std::to_string(t.negatives.size()) + " negatives, want 7");
        auto scores = j.find("teacher_scores");
        if (scores == j.end() || !scores->is_array())
            throw Error(Err::MalformedLine, where + ": missing 'teacher_scores' array");
        for (const auto& s : *scores) {
            if (!s.is_number()) throw Error(Err::MalformedLine, where + ": non-numeric teacher score");
            double v = s.get<double>();
            if (!std::isfinite(v))
                throw Error(Err::MalformedLine, where + ": non-finite teacher score");
            t.teacher_scores.push_back(v);
        }
        if (t.teacher_scores.size() != kTripletWays)
            throw Error(Err::WrongScoreCount,
                        where + ": " + std::to_string(t.teacher_scores.size()) + " scores, want 8");
        triplets.push_back(std::move(t));
    });
    return triplets;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::string out;
    for (const auto& d : corpus.docs) {
        ojson j;
        j["_id"] = d.doc_id;
        j["title"] = d.title;
        j["text"] = d.text;
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

void save_queries(const std::vector<Query>& queries, const std::string& path) {
    std::string out;
    for (const auto& q : queries) {
        ojson j;
        j["_id"] = q.query_id;
        j["text"] = q.text;
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

void save_qrels(const Qrels& qrels, const std::string& path) {
    std::string out;
    for (const auto& [qid, docs] : qrels.by_query)
        for (const auto& [did, grade] : docs)
            out += qid + "\t0\t" + did + "\t" + std::to_string(grade) + "\n";
    write_file_atomic(path, out);
}

void save_pairs(const std::vector<PairExample>& pairs, const std::string& path) {
    std::string out;
    for (const auto& p : pairs) {
        ojson j;
        j["left"] = p.left_text;
        j["right"] = p.right_text;
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

void save_triplets(const std::vector<TripletExample>& triplets, const std::string& path) {
    std::string out;
    for (const auto& t : triplets) {
        ojson j;
        j["query"] = t.query_text;
        j["positive"] = t.positive;
        j["negatives"] = t.negatives;
        j["teacher_scores"] = t.teacher_scores;
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

} // namespace lire

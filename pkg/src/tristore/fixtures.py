"""Deterministic desk-scale fixture generators for the three workloads.

The bundled datasets are synthetic analogs of the originals (patent abstracts,
news articles, senator handles, a text collection, and a small Twitter-style
graph); identical seeds produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os
import random

STOPWORDS = ["the", "a", "an", "of", "to", "and", "in", "on", "for", "with",
             "is", "are", "was", "were", "be", "this", "that", "it", "as",
             "at", "by", "from", "or", "has", "have"]

COMMON = ["report", "city", "people", "week", "new", "study", "officials",
          "program", "data", "public", "national", "local", "group", "plan",
          "state", "federal", "member", "leader", "record", "service"]

VIRUS = ["corona", "covid", "pandemic", "vaccine", "outbreak", "variant",
         "immunity", "testing"]

POLITICS = ["senate", "election", "policy", "campaign", "debate", "vote",
            "congress", "reform", "bill", "hearing"]

TECH = ["laser", "sensor", "polymer", "battery", "coating", "antenna",
        "photonic", "membrane", "alloy", "turbine", "plasma", "catalyst",
        "nanotube", "microchip", "gyroscope", "actuator", "composite",
        "semiconductor", "infrared", "ultrasonic"]

SENATORS = [
    ("Maria Castillo", "mcastillo"), ("John Blake", "jblake"),
    ("Priya Raman", "praman"), ("Dan Whitfield", "dwhit"),
    ("Elena Ortiz", "eortiz"), ("Sam Porter", "sporter"),
    ("Grace Liu", "gliu"), ("Omar Haddad", "ohaddad"),
    ("Nina Petrov", "npetrov"), ("Carl Jensen", "cjensen"),
    ("Ruth Adebayo", "radebayo"), ("Felix Moreau", "fmoreau"),
]

ORGS = [("acme labs", "ORG"), ("globex corp", "ORG"), ("initech", "ORG")]


def _sentence(rng: random.Random, vocab: list[str], n: int) -> str:
    return " ".join(rng.choice(vocab) for _ in range(n))


def _article(rng: random.Random, vocab: list[str], sentences: int,
             inserts: list[str] | None = None) -> str:
    parts = []
    for _ in range(sentences):
        parts.append(_sentence(rng, vocab, rng.randint(6, 12)).capitalize() + ".")
    text = " ".join(parts)
    for phrase in inserts or []:
        words = text.split(" ")
        pos = rng.randint(0, max(0, len(words) - 1))
        words.insert(pos, phrase)
        text = " ".join(words)
    return text


def _write_csv(path: str, header: list[str], rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_lines(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_resources(out_dir: str) -> None:
    _write_lines(os.path.join(out_dir, "stopwords.txt"), STOPWORDS)
    gaz = [f"{name}\tPERSON" for name, _h in SENATORS]
    gaz += [f"{name}\t{t}" for name, t in ORGS]
    _write_lines(os.path.join(out_dir, "gazetteer.tsv"), gaz)


# --- PoliSci --------------------------------------------------------------------------

POLISCI_SCRIPT = '''\
USE newsDB;
create analysis PoliSci as (
keywords := ["corona", "covid", "pandemic", "vaccine"];
temp := keywords.map(i => stringReplace("text-field: $", i));
t := stringJoin(" OR ", temp);
doc<text-field:String> := executeSOLR("allnews", """q= $t & rows=50""");
namedentity := NER(doc.text-field);
user := executeSQL("Senator", "select distinct t.name as name, t.twittername as tname from twitterhandle t, $namedentity e where LOWER(e.name) = LOWER(t.name)");
users<name:String> := executeCypher("TwitterG", "match (u:User)-[:mention]-(n:User) where n.userName in $user.tname return u.userName as name");
userNameList := toList(user.name);
userNameP := userNameList.map(i => stringReplace("t.text contains '$'", i));
predicate := stringJoin(" OR ", userNameP);
tweet<t:String> := executeCypher("TwitterG", "match (t:Tweet) where $predicate return t.text as t");
store(user u, dbName="fs", tableName="key_users.csv", columnName=[("name", u.name), ("tname", u.tname)]);
);
'''

POLISCI_CATALOG = '''\
instance Senator {{
  model = relational;
  locality = served;
  fixed_latency_ms = 1;
  per_row_latency_us = {per_row_us};
  table twitterhandle (name:String, twittername:String) from "twitterhandle.csv";
}}
instance TwitterG {{
  model = graph;
  locality = embedded;
  nodes = "twitter_nodes.csv";
  edges = "twitter_edges.csv";
  label User (userName:String);
  label Tweet (text:String);
  edgelabel mention ();
  edgelabel writes ();
}}
instance allnews {{
  model = text;
  locality = embedded;
  field newsdocs (text-field:String) from "allnews.jsonl";
}}
'''


def make_polisci(out_dir: str, seed: int = 13, n_docs: int = 120,
                 per_row_us: int = 5) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    rng = random.Random(seed)
    _write_resources(out_dir)

    _write_csv(os.path.join(out_dir, "twitterhandle.csv"),
               ["name", "twittername"], list(SENATORS))

    vocab = COMMON + POLITICS
    docs = []
    mentioned = set()
    for i in range(n_docs):
        inserts = []
        if rng.random() < 0.45:
            inserts.append(rng.choice(VIRUS[:4]))
            if rng.random() < 0.7:
                name = rng.choice(SENATORS)[0]
                inserts.append(name)
                mentioned.add(name)
        docs.append(json.dumps(
            {"id": i, "text-field": _article(rng, vocab, rng.randint(2, 4),
                                             inserts)}))
    _write_lines(os.path.join(out_dir, "allnews.jsonl"), docs)

    # twitter graph: senator users + bystanders, mentions and authored tweets
    nodes = []
    node_id = 0
    user_ids = {}
    for _name, handle in SENATORS:
        nodes.append((f"n{node_id}", "User", handle, ""))
        user_ids[handle] = f"n{node_id}"
        node_id += 1
    others = [f"user{i}" for i in range(24)]
    for handle in others:
        nodes.append((f"n{node_id}", "User", handle, ""))
        user_ids[handle] = f"n{node_id}"
        node_id += 1
    tweets = []
    for i in range(60):
        if rng.random() < 0.5:
            name = rng.choice(SENATORS)[0]
            text = _article(rng, vocab, 1, [name.lower()])
        else:
            text = _article(rng, vocab, 1)
        tweets.append((f"n{node_id}", "Tweet", "", text))
        node_id += 1
    edges = []
    for handle in others:
        for _ in range(rng.randint(1, 3)):
            target = rng.choice(SENATORS)[1]
            edges.append((user_ids[handle], user_ids[target], "mention"))
    for i, (tid, _label, _h, _t) in enumerate(tweets):
        author = rng.choice(others)
        edges.append((user_ids[author], tid, "writes"))
    _write_csv(os.path.join(out_dir, "twitter_nodes.csv"),
               [":ID", ":LABEL", "userName", "text"], nodes + tweets)
    _write_csv(os.path.join(out_dir, "twitter_edges.csv"),
               [":START_ID", ":END_ID", ":TYPE"], edges)

    catalog_path = os.path.join(out_dir, "catalog.txt")
    with open(catalog_path, "w", encoding="utf-8") as fh:
        fh.write(POLISCI_CATALOG.format(per_row_us=per_row_us))
    script_path = os.path.join(out_dir, "polisci.adil")
    with open(script_path, "w", encoding="utf-8") as fh:
        fh.write(POLISCI_SCRIPT)
    return {"catalog": catalog_path, "script": script_path, "dir": out_dir}


# --- NewsAnalysis ------------------------------------------------------------------------

NEWS_SCRIPT = '''\
USE newsDB;
create analysis NewsAnalysis as (
src := "chicagotribune";
rawNews := executeSQL("News", "select id as newsid, news as newsText from newspaper where src = $src limit 1000");
processedNews := preprocess(rawNews.newsText, docid=rawNews.newsid, stopwords="stopwords.txt");
numTop := 3;
DTM, WTM := lda(processedNews, docid=true, topic=numTop, numKeywords=12, seed=11);
topicID := range(0, numTop, 1);
wtmPerTopic := topicID.map(i => WTM where getValue(_:Row, i) > 0.00);
wordsPerTopic := wtmPerTopic.map(m => rowNames(m));
wordsOfInterest := union(wordsPerTopic);
G := buildWordNeighborGraph(processedNews, maxDistance=5, words=wordsOfInterest);
relationPerTopic := wordsPerTopic.map(words => (<n:String, m:String, count:Integer>) executeCypher(G, "match (n)-[r:Cooccur]->(m) where n.value in $words and m.value in $words return n.value as n, m.value as m, r.count as count"));
graphPerTopic := relationPerTopic.map(r => ConstructGraphFromRelation(r, (:Word {value: r.n})-[:Cooccur{count: r.count}]->(:Word{value: r.m})));
scores := graphPerTopic.map(g => pageRank(g, topk=true, num=20));
aggregatePT := scores.map(i => sum(i.score));
store(aggregatePT t, dbName="News", tableName="aggregatePageRankofTopk", columnName=[("id", t.index), ("pagerank", t.value)]);
);
'''

NEWS_CATALOG = '''\
instance News {
  model = relational;
  locality = served;
  fixed_latency_ms = 1;
  per_row_latency_us = 5;
  table newspaper (id:Integer, news:String, src:String) from "newspaper.csv";
}
'''

TOPIC_VOCABS = [VIRUS, TECH[:8], POLITICS]


def make_news(out_dir: str, seed: int = 29, n_rows: int = 240) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    rng = random.Random(seed)
    _write_resources(out_dir)
    rows = []
    for i in range(n_rows):
        topic_vocab = TOPIC_VOCABS[i % len(TOPIC_VOCABS)]
        vocab = topic_vocab * 3 + COMMON[:8]
        src = "chicagotribune" if i % 5 != 4 else "otherwire"
        rows.append((i, _article(rng, vocab, rng.randint(2, 3)), src))
    _write_csv(os.path.join(out_dir, "newspaper.csv"), ["id", "news", "src"],
               rows)
    catalog_path = os.path.join(out_dir, "catalog.txt")
    with open(catalog_path, "w", encoding="utf-8") as fh:
        fh.write(NEWS_CATALOG)
    script_path = os.path.join(out_dir, "newsanalysis.adil")
    with open(script_path, "w", encoding="utf-8") as fh:
        fh.write(NEWS_SCRIPT)
    return {"catalog": catalog_path, "script": script_path, "dir": out_dir}


# --- PatentAnalysis ------------------------------------------------------------------------

PATENT_SCRIPT = '''\
USE patentDB;
create analysis PatentAnalysis as (
abstracts := executeSQL("Patent", "select abstract as abstract from sbir_award_data limit 500");
docs := preprocess(abstracts.abstract, stopwords="stopwords.txt");
keywords := keyphraseMining(docs, 60);
graph := buildWordNeighborGraph(docs, maxDistance=5, words=keywords);
bscores := betweenness(graph);
pscores := pageRank(graph, topk=true, num=20);
store(bscores b, dbName="fs", tableName="betweenness.csv", columnName=[("word", b.node_key), ("score", b.score)]);
store(pscores p, dbName="fs", tableName="pagerank.csv", columnName=[("word", p.node_key), ("score", p.score)]);
);
'''

PATENT_CATALOG = '''\
instance Patent {
  model = relational;
  locality = served;
  fixed_latency_ms = 1;
  per_row_latency_us = 5;
  table sbir_award_data (id:Integer, abstract:String) from "sbir.csv";
}
'''


def make_patent(out_dir: str, seed: int = 41, n_rows: int = 200) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    rng = random.Random(seed)
    _write_resources(out_dir)
    rows = []
    for i in range(n_rows):
        # bias toward a few salient terms so keyphrase mining is stable
        vocab = TECH * 2 + COMMON[:10]
        rows.append((i, _article(rng, vocab, rng.randint(2, 4))))
    _write_csv(os.path.join(out_dir, "sbir.csv"), ["id", "abstract"], rows)
    catalog_path = os.path.join(out_dir, "catalog.txt")
    with open(catalog_path, "w", encoding="utf-8") as fh:
        fh.write(PATENT_CATALOG)
    script_path = os.path.join(out_dir, "patentanalysis.adil")
    with open(script_path, "w", encoding="utf-8") as fh:
        fh.write(PATENT_SCRIPT)
    return {"catalog": catalog_path, "script": script_path, "dir": out_dir}


PRESETS = {"polisci": make_polisci, "news": make_news, "patent": make_patent}


def make_speedup_corpus(n_docs: int = 20000, seed: int = 3):
    """Synthetic documents for the parallel-speedup benchmark."""
    from .values import Corpus, Document
    rng = random.Random(seed)
    vocab = COMMON + TECH + POLITICS + VIRUS
    docs = [Document(i, _sentence(rng, vocab, 60)) for i in range(n_docs)]
    return Corpus(docs)

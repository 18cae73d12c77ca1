"""Emergent-language diagnostics over evaluation logs: accuracy, vocabulary
usage, symbol-class association and mutual information."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass
class ContingencyTable:
    labels: list          # class order (rows)
    counts: np.ndarray    # (K, V) nonnegative integers

    @property
    def total(self):
        return int(self.counts.sum())


def contingency_from_outcomes(outcomes, labels, vocab_size):
    counts = np.zeros((len(labels), vocab_size), dtype=np.int64)
    row = {c: i for i, c in enumerate(labels)}
    for o in outcomes:
        counts[row[o.target_label], o.symbol_index] += 1
    return ContingencyTable(list(labels), counts)


@dataclass
class LanguageReport:
    identification_accuracy: float
    symbols_used_fraction: float
    majority_symbols: dict      # label -> (symbol index, purity)
    mutual_information_bits: float
    contingency: ContingencyTable


def identification_accuracy(outcomes):
    if not outcomes:
        raise ContractError("empty outcome list")
    return sum(o.correct for o in outcomes) / len(outcomes)


def symbols_used_fraction(outcomes, vocab_size):
    if not outcomes:
        raise ContractError("empty outcome list")
    return len({o.symbol_index for o in outcomes}) / vocab_size


def majority_symbols(table):
    """Per class: the most frequent symbol (lowest index on ties) and its
    share of the class row."""
    out = {}
    for i, label in enumerate(table.labels):
        row = table.counts[i]
        row_sum = row.sum()
        if row_sum == 0:
            raise ContractError("class %r has no logged rounds" % label)
        s = int(np.argmax(row))
        out[label] = (s, float(row[s] / row_sum))
    return out


def mutual_information_bits(table):
    """I(class; symbol) in bits; zero joint cells contribute nothing."""
    total = table.counts.sum()
    if total == 0:
        raise ContractError("contingency table is empty")
    p = table.counts / total
    pc = p.sum(axis=1)
    ps = p.sum(axis=0)
    nz = p > 0
    denom = np.outer(pc, ps)
    return float(np.sum(p[nz] * np.log2(p[nz] / denom[nz])))


def build_report(outcomes, labels, vocab_size):
    table = contingency_from_outcomes(outcomes, labels, vocab_size)
    return LanguageReport(
        identification_accuracy=identification_accuracy(outcomes),
        symbols_used_fraction=symbols_used_fraction(outcomes, vocab_size),
        majority_symbols=majority_symbols(table),
        mutual_information_bits=mutual_information_bits(table),
        contingency=table,
    )


def write_report(report, path):
    """Flat key=value text mirroring the report fields."""
    lines = [
        "identification_accuracy=%r" % report.identification_accuracy,
        "symbols_used_fraction=%r" % report.symbols_used_fraction,
        "mutual_information_bits=%r" % report.mutual_information_bits,
    ]
    for label, (sym, purity) in report.majority_symbols.items():
        lines.append("majority_symbol.%s=%d" % (label, sym))
        lines.append("purity.%s=%r" % (label, purity))
    for i, label in enumerate(report.contingency.labels):
        lines.append("contingency.%s=%s" % (
            label, ",".join(str(v) for v in report.contingency.counts[i])))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _contingency_path(path):
    base, dot, ext = str(path).rpartition(".")
    return (base + "_contingency." + ext) if dot else str(path) + "_contingency"


def export_symbol_distribution(outcomes, path, labels=None, vocab_size=None):
    """Long-form `class,symbol_index` rows (one per round) for external
    violin/strip plots, plus the class-by-symbol count matrix alongside."""
    if not outcomes:
        raise ContractError("empty outcome list")
    if labels is None:
        labels = sorted({o.target_label for o in outcomes})
    if vocab_size is None:
        vocab_size = max(o.symbol_index for o in outcomes) + 1
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "symbol_index"])
        for o in outcomes:
            writer.writerow([o.target_label, o.symbol_index])
    table = contingency_from_outcomes(outcomes, labels, vocab_size)
    with open(_contingency_path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class"] + ["s%d" % v for v in range(vocab_size)])
        for i, label in enumerate(labels):
            writer.writerow([label] + [int(v) for v in table.counts[i]])
    return table


def load_symbol_distribution(path, labels, vocab_size):
    """Rebuild a ContingencyTable from a long-form export."""
    counts = np.zeros((len(labels), vocab_size), dtype=np.int64)
    row = {c: i for i, c in enumerate(labels)}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for cls, sym in reader:
            counts[row[cls], int(sym)] += 1
    return ContingencyTable(list(labels), counts)

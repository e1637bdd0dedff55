"""
Question types and the hierarchical decomposition tree.

Nodes are indexed in post-order: every sub-question gets its index before
its parent, so the root of a tree with three sub-questions is node 3 with
sons ``[0, 1, 2]``.
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from ..core.errors import DepthExceeded, MalformedDecomposition, PlaceholderViolation

PLACEHOLDER_RE = re.compile(r"#(\d+)")
DEFAULT_MAX_DEPTH = 4


class QuestionCategory(Enum):
    EQUAL = "Equal"
    BEFORE_AFTER = "BeforeAfter"
    FIRST_LAST = "FirstLast"
    EQUAL_MULTI = "EqualMulti"
    BEFORE_LAST = "BeforeLast"
    AFTER_FIRST = "AfterFirst"
    TIMELINE_SIMPLE = "TimelineSimple"
    TIMELINE_MEDIUM = "TimelineMedium"
    TIMELINE_COMPLEX = "TimelineComplex"


class Complexity(Enum):
    SINGLE = "Single"
    MULTIPLE = "Multiple"
    SIMPLE = "Simple"
    MEDIUM = "Medium"
    COMPLEX = "Complex"


_COMPLEXITY = {
    QuestionCategory.EQUAL: Complexity.SINGLE,
    QuestionCategory.BEFORE_AFTER: Complexity.SINGLE,
    QuestionCategory.FIRST_LAST: Complexity.SINGLE,
    QuestionCategory.EQUAL_MULTI: Complexity.MULTIPLE,
    QuestionCategory.BEFORE_LAST: Complexity.MULTIPLE,
    QuestionCategory.AFTER_FIRST: Complexity.MULTIPLE,
    QuestionCategory.TIMELINE_SIMPLE: Complexity.SIMPLE,
    QuestionCategory.TIMELINE_MEDIUM: Complexity.MEDIUM,
    QuestionCategory.TIMELINE_COMPLEX: Complexity.COMPLEX,
}


@dataclass(frozen=True)
class QuestionType:
    category: QuestionCategory
    complexity: Complexity

    @classmethod
    def from_category(cls, category):
        category = QuestionCategory(category)
        return cls(category, _COMPLEXITY[category])

    def to_dict(self):
        return {"category": self.category.value, "complexity": self.complexity.value}

    @classmethod
    def from_dict(cls, data):
        return cls(QuestionCategory(data["category"]), Complexity(data["complexity"]))


@dataclass
class DecompositionNode:
    idx: int
    question_text: str
    sons: list = field(default_factory=list)
    fa: Optional[int] = None
    qlabel: Optional[QuestionType] = None
    gold_answer: Optional[str] = None

    def to_dict(self):
        return {
            "idx": self.idx,
            "question_text": self.question_text,
            "sons": list(self.sons),
            "fa": self.fa,
            "qlabel": self.qlabel.to_dict() if self.qlabel is not None else None,
            "gold_answer": self.gold_answer,
        }

    @classmethod
    def from_dict(cls, data):
        qlabel = data.get("qlabel")
        return cls(
            idx=int(data["idx"]),
            question_text=data["question_text"],
            sons=[int(s) for s in data.get("sons", [])],
            fa=data.get("fa"),
            qlabel=QuestionType.from_dict(qlabel) if qlabel else None,
            gold_answer=data.get("gold_answer"),
        )


def placeholders(text):
    """Returns the placeholder numbers referenced in ``text``, in order."""
    return [int(j) for j in PLACEHOLDER_RE.findall(text)]


class QueryTree:
    """
    A question and its sub-questions.

    :param nodes: Tree nodes; indices must be unique.
    :type nodes: list[:class:`DecompositionNode`]
    :param root_idx: Index of the root node.
    :type root_idx: int
    :param decompose_calls: LLM calls spent building the tree.
    :type decompose_calls: int
    """

    def __init__(self, nodes, root_idx, decompose_calls=0):
        self._nodes = {}
        for node in nodes:
            if node.idx in self._nodes:
                raise MalformedDecomposition(f"duplicate node index {node.idx}")
            self._nodes[node.idx] = node
        self.root_idx = root_idx
        self.decompose_calls = decompose_calls

    @classmethod
    def leaf_only(cls, question, qlabel=None, gold_answer=None, decompose_calls=0):
        return cls([DecompositionNode(0, question, [], None, qlabel, gold_answer)], 0, decompose_calls)

    @property
    def nodes(self):
        return [self._nodes[idx] for idx in sorted(self._nodes)]

    @property
    def root(self):
        return self._nodes[self.root_idx]

    def node(self, idx):
        return self._nodes[idx]

    def is_leaf(self, idx):
        return not self._nodes[idx].sons

    def __len__(self):
        return len(self._nodes)

    def validate(self, max_depth=None):
        """
        Checks the tree invariants.

        :raises MalformedDecomposition: wrong root, inconsistent links, cycles or unreachable nodes.
        :raises PlaceholderViolation: a sub-question refers to itself or a later sibling.
        :raises DepthExceeded: the tree is deeper than ``max_depth``.
        """
        if self.root_idx not in self._nodes:
            raise MalformedDecomposition(f"root index {self.root_idx} is not a node")
        roots = [n.idx for n in self._nodes.values() if n.fa is None]
        if roots != [self.root_idx]:
            raise MalformedDecomposition(f"expected exactly one root ({self.root_idx}), found {roots}")

        seen = set()
        stack = [self.root_idx]
        while stack:
            idx = stack.pop()
            if idx in seen:
                raise MalformedDecomposition(f"node {idx} is reachable twice")
            seen.add(idx)
            for son in self._nodes[idx].sons:
                if son not in self._nodes:
                    raise MalformedDecomposition(f"node {idx} lists unknown son {son}")
                if self._nodes[son].fa != idx:
                    raise MalformedDecomposition(f"node {son} does not point back to its parent {idx}")
                stack.append(son)
        if seen != set(self._nodes):
            raise MalformedDecomposition(f"unreachable nodes: {sorted(set(self._nodes) - seen)}")

        for node in self._nodes.values():
            for position, son in enumerate(node.sons, start=1):
                for j in placeholders(self._nodes[son].question_text):
                    if not 1 <= j < position:
                        raise PlaceholderViolation(
                            f"sub-question {position} of node {node.idx} refers to #{j}: "
                            f"{self._nodes[son].question_text!r}"
                        )

        if max_depth is not None and self.depth() > max_depth:
            raise DepthExceeded(f"tree depth {self.depth()} exceeds the cap of {max_depth}")
        return self

    def depth(self):
        """Longest root-to-leaf path, counted in edges."""
        def _depth(idx):
            sons = self._nodes[idx].sons
            return 0 if not sons else 1 + max(_depth(s) for s in sons)
        return _depth(self.root_idx)

    def branch(self):
        """Mean child count over non-leaf nodes; 0 for a leaf-only tree."""
        inner = [len(n.sons) for n in self._nodes.values() if n.sons]
        return sum(inner) / len(inner) if inner else 0.0

    def to_dict(self):
        return {
            "root_idx": self.root_idx,
            "decompose_calls": self.decompose_calls,
            "nodes": [n.to_dict() for n in self.nodes],
        }

    @classmethod
    def from_dict(cls, data):
        nodes = [DecompositionNode.from_dict(n) for n in data["nodes"]]
        return cls(nodes, int(data["root_idx"]), int(data.get("decompose_calls", 0)))

    def __repr__(self):
        return f"QueryTree(root={self.root_idx}, nodes={len(self)}, depth={self.depth()})"


def _split_child(child):
    if isinstance(child, str):
        return child, []
    if isinstance(child, dict) and len(child) == 1:
        text, sons = next(iter(child.items()))
        if isinstance(sons, list):
            return text, sons
    raise MalformedDecomposition(f"sub-question must be a string or a single-key object, got {child!r}")


def tree_from_struct(root_text, subquestions, qlabel=None, gold_answer=None):
    """
    Builds a :class:`QueryTree` from parsed sub-questions.

    Sub-questions are strings, or single-key objects ``{text: [...]}`` for
    nested decompositions. Indices are assigned in post-order.

    :param root_text: Text of the root question.
    :type root_text: str
    :param subquestions: Ordered sub-questions of the root.
    :type subquestions: list
    :rtype: :class:`QueryTree`
    """
    nodes = []

    def _add(text, children):
        if not isinstance(text, str) or not text.strip():
            raise MalformedDecomposition("empty question text in decomposition")
        son_ids = [_add(*_split_child(child)) for child in children]
        idx = len(nodes)
        nodes.append(DecompositionNode(idx=idx, question_text=text.strip(), sons=son_ids))
        for son in son_ids:
            nodes[son].fa = idx
        return idx

    root_idx = _add(root_text, subquestions)
    nodes[root_idx].qlabel = qlabel
    nodes[root_idx].gold_answer = gold_answer
    return QueryTree(nodes, root_idx)

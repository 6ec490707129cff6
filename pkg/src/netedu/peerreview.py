"""Peer-review allocation: balanced random-2 and 5-candidates-choose-2.

Strategy "balanced" gives every student exactly two foreign projects to
review with uniform per-project load, constructed from two cyclic shifts
of a seeded project permutation (no rejection sampling over whole
assignments, so feasibility is by construction). Strategy "choice" hands
each student a candidate list of up to five foreign projects from which
they later pick two; it cannot guarantee that every project receives
reviews, which `coverage_report` makes visible.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .rng import SplitMix64

DEFAULT_CANDIDATES = 5


class RosterError(ValueError):
    pass


class InfeasibleError(ValueError):
    pass


class ChoiceError(ValueError):
    pass


@dataclass(frozen=True)
class Roster:
    projects: list[str]
    authors: dict[str, set[str]]  # project id -> author student ids
    students: list[str] = dc_field(default_factory=list)

    def __post_init__(self):
        if set(self.authors) != set(self.projects):
            raise RosterError("authors map must cover exactly the projects")
        seen: dict[str, str] = {}
        for project, members in self.authors.items():
            if not members:
                raise RosterError(f"project {project} has no authors")
            for student in members:
                if student in seen:
                    raise RosterError(
                        f"student {student} authors both {seen[student]} "
                        f"and {project}")
                seen[student] = project
        if not self.students:
            ordered = [st for p in self.projects
                       for st in sorted(self.authors[p])]
            object.__setattr__(self, "students", ordered)
        elif set(self.students) != set(seen):
            raise RosterError("students list disagrees with authors map")

    def project_of(self, student: str) -> str:
        for project, members in self.authors.items():
            if student in members:
                return project
        raise RosterError(f"unknown student {student}")


@dataclass
class Allocation:
    strategy: str  # "balanced" | "choice"
    projects: list[str]
    assigned: dict[str, list[str]]  # student -> projects (2 or candidates)
    choices: dict[str, list[str]] = dc_field(default_factory=dict)
    seed: int = 0


def _draw_shifts(rng: SplitMix64, n: int) -> tuple[int, int]:
    # distinct nonzero shifts; avoid s1+s2 == 0 (mod n) so review pairs are
    # not all mutual. For n == 3 the only distinct pair {1, 2} sums to 0
    # mod 3 and is unavoidable.
    while True:
        s1 = rng.randbelow(n - 1) + 1
        s2 = rng.randbelow(n - 1) + 1
        if s1 == s2:
            continue
        if n > 3 and (s1 + s2) % n == 0:
            continue
        return s1, s2


def allocate_balanced(roster: Roster, seed: int) -> Allocation:
    """Two reviews per student, equal load per project (for equal-size
    author groups), never one's own project. Deterministic in seed."""
    n = len(roster.projects)
    if n < 3:
        raise InfeasibleError(
            "balanced allocation needs at least 3 projects to give every "
            "student 2 distinct foreign projects")
    rng = SplitMix64(seed)
    perm = list(roster.projects)
    rng.shuffle(perm)
    s1, s2 = _draw_shifts(rng, n)
    position = {p: i for i, p in enumerate(perm)}
    assigned = {}
    for project in roster.projects:
        i = position[project]
        targets = [perm[(i + s1) % n], perm[(i + s2) % n]]
        for student in sorted(roster.authors[project]):
            assigned[student] = list(targets)
    return Allocation("balanced", list(roster.projects), assigned, seed=seed)


def allocate_choice(roster: Roster, seed: int,
                    k: int = DEFAULT_CANDIDATES) -> Allocation:
    """Candidate lists of min(k, N-1) foreign projects per student."""
    n = len(roster.projects)
    if n < 2:
        raise InfeasibleError("choice allocation needs at least 2 projects")
    rng = SplitMix64(seed)
    assigned = {}
    for student in roster.students:
        own = roster.project_of(student)
        foreign = [p for p in roster.projects if p != own]
        assigned[student] = rng.sample(foreign, min(k, len(foreign)))
    return Allocation("choice", list(roster.projects), assigned, seed=seed)


def record_choice(allocation: Allocation, student: str,
                  chosen: list[str]) -> Allocation:
    """Record the two projects a student picked from their candidates."""
    if student not in allocation.assigned:
        raise ChoiceError(f"unknown student {student}")
    if len(chosen) != 2 or len(set(chosen)) != 2:
        raise ChoiceError("exactly 2 distinct projects must be chosen")
    candidates = set(allocation.assigned[student])
    outside = [p for p in chosen if p not in candidates]
    if outside:
        raise ChoiceError(f"choice outside candidate list: {outside}")
    allocation.choices[student] = list(chosen)
    return allocation


@dataclass(frozen=True)
class CoverageReport:
    counts: dict[str, int]
    zero_review: list[str]


def coverage_report(allocation: Allocation) -> CoverageReport:
    """Reviews committed per project; flags projects nobody will review."""
    if allocation.strategy == "balanced":
        committed = allocation.assigned.values()
    else:
        committed = allocation.choices.values()
    counts = {p: 0 for p in allocation.projects}
    for projects in committed:
        for p in projects:
            counts[p] += 1
    zero = [p for p, c in counts.items() if c == 0]
    return CoverageReport(counts, zero)

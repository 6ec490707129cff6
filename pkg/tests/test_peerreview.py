import random

import pytest

from netedu.peerreview import (Allocation, ChoiceError, CoverageReport,
                               InfeasibleError, Roster, RosterError,
                               allocate_balanced, allocate_choice,
                               coverage_report, record_choice)


def single_author_roster(n):
    projects = [f"p{i}" for i in range(n)]
    return Roster(projects, {p: {f"s{i}"} for i, p in enumerate(projects)})


def pair_roster(n):
    projects = [f"p{i}" for i in range(n)]
    return Roster(projects,
                  {p: {f"s{i}a", f"s{i}b"} for i, p in enumerate(projects)})


class TestRoster:
    def test_student_in_two_projects_rejected(self):
        with pytest.raises(RosterError):
            Roster(["a", "b"], {"a": {"s1"}, "b": {"s1"}})

    def test_empty_project_rejected(self):
        with pytest.raises(RosterError):
            Roster(["a"], {"a": set()})

    def test_students_derived(self):
        r = single_author_roster(3)
        assert sorted(r.students) == ["s0", "s1", "s2"]


class TestBalanced:
    def test_three_projects_forced_solution(self):
        alloc = allocate_balanced(single_author_roster(3), seed=1)
        for i in range(3):
            own = f"p{i}"
            reviewed = alloc.assigned[f"s{i}"]
            assert sorted(reviewed) == sorted(
                p for p in ["p0", "p1", "p2"] if p != own)
        report = coverage_report(alloc)
        assert all(c == 2 for c in report.counts.values())

    def test_two_projects_infeasible(self):
        with pytest.raises(InfeasibleError):
            allocate_balanced(single_author_roster(2), seed=1)

    def test_seeds_differ(self):
        roster = single_author_roster(10)
        a1 = allocate_balanced(roster, seed=1)
        a2 = allocate_balanced(roster, seed=2)
        assert a1.assigned != a2.assigned  # overwhelmingly likely by design

    def test_determinism(self):
        roster = single_author_roster(12)
        assert allocate_balanced(roster, 7).assigned == \
            allocate_balanced(roster, 7).assigned

    def test_properties_random_rosters(self):
        rnd = random.Random(11)
        for _ in range(200):
            n = rnd.randint(3, 50)
            roster = single_author_roster(n)
            alloc = allocate_balanced(roster, rnd.getrandbits(63))
            counts = coverage_report(alloc).counts
            assert set(counts.values()) == {2}
            for student, reviewed in alloc.assigned.items():
                own = roster.project_of(student)
                assert own not in reviewed
                assert len(set(reviewed)) == 2

    def test_pair_groups_balanced(self):
        alloc = allocate_balanced(pair_roster(8), seed=3)
        counts = coverage_report(alloc).counts
        assert set(counts.values()) == {4}  # 2 reviews x 2 authors
        for student, reviewed in alloc.assigned.items():
            assert len(reviewed) == 2


class TestChoice:
    def test_six_projects_all_foreign(self):
        roster = single_author_roster(6)
        alloc = allocate_choice(roster, seed=9)
        for student, candidates in alloc.assigned.items():
            own = roster.project_of(student)
            assert sorted(candidates) == sorted(
                p for p in roster.projects if p != own)

    def test_twenty_projects_lists_of_five(self):
        roster = single_author_roster(20)
        alloc = allocate_choice(roster, seed=5)
        for student, candidates in alloc.assigned.items():
            assert len(candidates) == 5
            assert len(set(candidates)) == 5
            assert roster.project_of(student) not in candidates

    def test_coverage_over_seeds(self):
        roster = single_author_roster(20)
        for student in roster.students:
            seen = set()
            for seed in range(200):
                seen.update(allocate_choice(roster, seed).assigned[student])
            own = roster.project_of(student)
            assert seen == set(p for p in roster.projects if p != own)

    def test_one_project_infeasible(self):
        with pytest.raises(InfeasibleError):
            allocate_choice(single_author_roster(1), seed=0)


class TestChoices:
    def test_record_valid_choice(self):
        roster = single_author_roster(8)
        alloc = allocate_choice(roster, seed=1)
        picks = alloc.assigned["s0"][:2]
        record_choice(alloc, "s0", picks)
        assert alloc.choices["s0"] == picks

    def test_choice_outside_candidates(self):
        roster = single_author_roster(8)
        alloc = allocate_choice(roster, seed=1)
        own = roster.project_of("s0")
        assert own not in alloc.assigned["s0"]  # never offered own project
        with pytest.raises(ChoiceError):
            record_choice(alloc, "s0", [own, alloc.assigned["s0"][0]])

    def test_non_pair_choices_rejected(self):
        roster = single_author_roster(8)
        alloc = allocate_choice(roster, seed=1)
        c = alloc.assigned["s0"]
        with pytest.raises(ChoiceError):
            record_choice(alloc, "s0", [c[0]])
        with pytest.raises(ChoiceError):
            record_choice(alloc, "s0", [c[0], c[0]])

    def test_zero_review_flagged(self):
        roster = single_author_roster(5)
        alloc = allocate_choice(roster, seed=2, k=2)
        avoided = "p4"
        for student in roster.students:
            candidates = [p for p in alloc.assigned[student] if p != avoided]
            if len(candidates) >= 2:
                record_choice(alloc, student, candidates[:2])
        report = coverage_report(alloc)
        if all(avoided not in ch for ch in alloc.choices.values()):
            assert avoided in report.zero_review
        assert report.counts.keys() == set(roster.projects)

import threading

import pytest

from tutorhub.collab import (
    GroupFull,
    GroupService,
    InvalidPasskey,
    MAX_MEMBERS,
    PASSKEY_ALPHABET,
    PASSKEY_LENGTH,
    RevokedPasskey,
    UnknownGroup,
    mint_passkey,
)
from tutorhub.identity import Role, Unauthorized
from tutorhub.ledger import LedgerStore


@pytest.fixture()
def groups(clock):
    return GroupService(clock=clock)


class TestCreateGroup:
    def test_creator_is_sole_member(self, groups, teacher):
        group, passkey = groups.create_group(teacher, "agent-1")
        assert group.members == {teacher.user_id}
        assert passkey.group_id == group.group_id
        assert len(passkey.key_text) == PASSKEY_LENGTH
        assert set(passkey.key_text) <= set(PASSKEY_ALPHABET)

    def test_student_created_group_is_flagged(self, groups, student):
        group, _ = groups.create_group(student, "agent-1")
        assert group.student_created

    def test_minted_passkeys_distinct(self, groups, teacher):
        seen = {groups.create_group(teacher, "a")[1].key_text for _ in range(2000)}
        assert len(seen) == 2000


class TestJoinGroup:
    def test_five_members_accepted_sixth_rejected(self, groups, teacher):
        group, passkey = groups.create_group(teacher, "agent-1")
        for i in range(MAX_MEMBERS - 1):  # creator holds one slot
            groups.join_group(f"user-{i}", passkey.key_text)
        assert len(groups.get_group(group.group_id).members) == MAX_MEMBERS
        with pytest.raises(GroupFull):
            groups.join_group("user-late", passkey.key_text)

    def test_join_is_idempotent(self, groups, teacher):
        group, passkey = groups.create_group(teacher, "agent-1")
        groups.join_group("user-a", passkey.key_text)
        groups.join_group("user-a", passkey.key_text)
        assert len(groups.get_group(group.group_id).members) == 2

    def test_wrong_key(self, groups, teacher):
        groups.create_group(teacher, "agent-1")
        with pytest.raises(InvalidPasskey):
            groups.join_group("user-a", mint_passkey())

    def test_revoked_key(self, groups, teacher):
        group, passkey = groups.create_group(teacher, "agent-1")
        groups.join_group("user-a", passkey.key_text)
        groups.revoke_passkey(teacher, group.group_id)
        with pytest.raises(RevokedPasskey):
            groups.join_group("user-b", passkey.key_text)
        # existing members remain
        assert "user-a" in groups.get_group(group.group_id).members

    def test_only_creator_or_admin_revokes(self, groups, teacher, student, admin):
        group, _ = groups.create_group(teacher, "agent-1")
        with pytest.raises(Unauthorized):
            groups.revoke_passkey(student, group.group_id)
        groups.revoke_passkey(admin, group.group_id)

    def test_concurrent_joins_never_exceed_cap(self, groups, teacher):
        group, passkey = groups.create_group(teacher, "agent-1")
        barrier = threading.Barrier(20)
        outcomes = []

        def attempt(i):
            barrier.wait()
            try:
                groups.join_group(f"user-{i}", passkey.key_text)
                outcomes.append("ok")
            except GroupFull:
                outcomes.append("full")

        threads = [threading.Thread(target=attempt, args=(i,)) for i in range(20)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        members = groups.get_group(group.group_id).members
        assert len(members) == MAX_MEMBERS
        assert outcomes.count("ok") == MAX_MEMBERS - 1
        assert outcomes.count("full") == 20 - (MAX_MEMBERS - 1)

    def test_unknown_group(self, groups, teacher):
        with pytest.raises(UnknownGroup):
            groups.get_group("g-nope")


class TestOversight:
    def _ledger_with_turns(self, groups, group, clock):
        ledger = LedgerStore(clock=clock)
        for i, user in enumerate(sorted(group.members)):
            cid = f"conv-{i}"
            ledger.open_conversation(cid, user, "Teacher", "text", group.agent_id, group.group_id)
            for t in range(i + 1):
                ledger.log_turn(cid, "User", f"question {t}", "AwaitingInput")
                ledger.log_turn(cid, "Agent", f"answer {t}", "Delivered", "mock/one", 5)
            groups.attach_conversation(group.group_id, cid)
        return ledger

    def test_creator_sees_full_transcripts_and_counts(self, groups, teacher, clock):
        group, passkey = groups.create_group(teacher, "agent-1")
        groups.join_group("user-b", passkey.key_text)
        ledger = self._ledger_with_turns(groups, group, clock)
        view = groups.oversight_view(teacher, group.group_id, ledger)
        assert set(view["transcripts"]) == set(group.conversation_ids)
        # recount from raw ledger rows
        for cid, turns in view["transcripts"].items():
            owner = ledger.conversation_owner(cid)
            expected = sum(1 for t in ledger.transcript(cid) if t.speaker == "User")
            assert view["participation"][owner] == expected

    def test_non_member_teacher_unauthorized(self, groups, identity, teacher, clock):
        outsider = identity.register("outsider", "pw-o", Role.TEACHER)
        group, _ = groups.create_group(teacher, "agent-1")
        ledger = LedgerStore(clock=clock)
        with pytest.raises(Unauthorized):
            groups.oversight_view(outsider, group.group_id, ledger)

    def test_admin_can_oversee(self, groups, teacher, admin, clock):
        group, _ = groups.create_group(teacher, "agent-1")
        ledger = LedgerStore(clock=clock)
        view = groups.oversight_view(admin, group.group_id, ledger)
        assert view["members"] == [teacher.user_id]

    def test_probe_rejection_rate(self, groups, teacher):
        """Random probes never open a live group (scaled-down uniqueness run)."""
        _, passkey = groups.create_group(teacher, "agent-1")
        hits = 0
        for _ in range(20_000):
            probe = mint_passkey()
            if probe == passkey.key_text:
                hits += 1
        assert hits == 0

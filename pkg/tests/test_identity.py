import random

import pytest

from tutorhub.identity import (
    ACTIONS,
    DuplicateHandle,
    ExpiredToken,
    IdentityService,
    InvalidCredentials,
    InvalidToken,
    PERMISSION_MATRIX,
    Role,
    Unauthorized,
)

# The declared matrix, written out so a code change cannot silently pass.
EXPECTED_MATRIX = {
    Role.ADMINISTRATOR: {action: True for action in ACTIONS},
    Role.TEACHER: {
        "create_agent": True,
        "chat": True,
        "create_group": True,
        "join_group": True,
        "view_group_transcripts": True,
        "view_analytics": True,
        "admin_curriculum": False,
        "admin_users": False,
        "admin_logs": False,
    },
    Role.STUDENT_TEACHER: {
        "create_agent": False,
        "chat": True,
        "create_group": True,
        "join_group": True,
        "view_group_transcripts": True,
        "view_analytics": False,
        "admin_curriculum": False,
        "admin_users": False,
        "admin_logs": False,
    },
}


class TestRegistration:
    def test_register_teacher(self, identity):
        user = identity.register("efua", "pw-123456", Role.TEACHER)
        assert user.role is Role.TEACHER
        assert identity.get_user(user.user_id) == user

    def test_duplicate_handle(self, identity):
        identity.register("efua", "pw-123456", Role.TEACHER)
        with pytest.raises(DuplicateHandle):
            identity.register("efua", "other", Role.STUDENT_TEACHER)

    def test_teacher_cannot_mint_admin(self, identity, teacher):
        token = identity.verify(identity.issue_token(teacher))
        with pytest.raises(Unauthorized):
            identity.register("boss", "pw", Role.ADMINISTRATOR, actor=token)

    def test_admin_can_mint_admin(self, identity, admin):
        token = identity.verify(identity.issue_token(admin))
        user = identity.register("boss", "pw-999999", Role.ADMINISTRATOR, actor=token)
        assert user.role is Role.ADMINISTRATOR


class TestAuthentication:
    def test_correct_secret_round_trip(self, identity, teacher):
        token_text = identity.authenticate("ama.teacher", "s3cret-ama")
        claims = identity.verify(token_text)
        assert claims.user_id == teacher.user_id
        assert claims.role is Role.TEACHER
        assert claims.expires_at - claims.issued_at == identity.token_ttl_s

    def test_wrong_secret(self, identity, teacher):
        with pytest.raises(InvalidCredentials):
            identity.authenticate("ama.teacher", "wrong")

    def test_unknown_handle_same_error(self, identity):
        with pytest.raises(InvalidCredentials):
            identity.authenticate("ghost", "whatever")

    def test_expiry(self, identity, teacher, clock):
        token_text = identity.authenticate("ama.teacher", "s3cret-ama")
        clock.advance(identity.token_ttl_s + 1)
        with pytest.raises(ExpiredToken):
            identity.verify(token_text)

    def test_token_round_trip_property(self, identity):
        rng = random.Random(7)
        for i in range(20):
            role = rng.choice(list(Role))
            user = identity.register(f"user-{i}", f"pw-{i}", role) if role is not Role.ADMINISTRATOR else identity.bootstrap_admin(f"user-{i}", f"pw-{i}")
            claims = identity.verify(identity.issue_token(user))
            assert (claims.user_id, claims.role) == (user.user_id, user.role)


class TestTamperDetection:
    def test_every_payload_bit_flip_fails(self, identity, teacher):
        token_text = identity.issue_token(teacher)
        prefix, body, sig = token_text.split(".")
        raw = bytearray(body.encode("ascii"))
        for byte_index in range(len(raw)):
            for bit in range(8):
                mutated = bytearray(raw)
                mutated[byte_index] ^= 1 << bit
                tampered = f"{prefix}.{mutated.decode('ascii', 'replace')}.{sig}"
                if tampered == token_text:
                    continue
                with pytest.raises(InvalidToken):
                    identity.verify(tampered)

    def test_wrong_key_fails(self, teacher, identity):
        other = IdentityService(signing_key=b"another-key-entirely", scrypt_n=2**11)
        token_text = identity.issue_token(teacher)
        with pytest.raises(InvalidToken):
            other.verify(token_text)

    def test_garbage_tokens(self, identity):
        for junk in ("", "abc", "v1.only-two", "v2.a.b"):
            with pytest.raises(InvalidToken):
                identity.verify(junk)


class TestAuthorization:
    def test_student_cannot_create_agent(self, identity, student):
        token = identity.verify(identity.issue_token(student))
        allowed, reason = identity.authorize(token, "create_agent")
        assert not allowed and "StudentTeacher" in reason

    def test_admin_views_logs(self, identity, admin):
        token = identity.verify(identity.issue_token(admin))
        assert identity.authorize(token, "admin_logs") == (True, "")

    def test_full_matrix(self, identity):
        users = {
            Role.TEACHER: identity.register("t", "pw", Role.TEACHER),
            Role.STUDENT_TEACHER: identity.register("s", "pw", Role.STUDENT_TEACHER),
            Role.ADMINISTRATOR: identity.bootstrap_admin("a", "pw"),
        }
        for role, user in users.items():
            token = identity.verify(identity.issue_token(user))
            for action in ACTIONS:
                allowed, _ = identity.authorize(token, action)
                assert allowed == EXPECTED_MATRIX[role][action], (role, action)

    def test_matrix_constant_matches_declaration(self):
        for role, row in EXPECTED_MATRIX.items():
            for action, allowed in row.items():
                assert PERMISSION_MATRIX[(role, action)] == allowed

    def test_unknown_action_denied(self, identity, admin):
        token = identity.verify(identity.issue_token(admin))
        allowed, reason = identity.authorize(token, "launch_rockets")
        assert not allowed and "unknown action" in reason


class TestNoPlaintextSecrets:
    def test_secret_absent_from_service_state(self, identity):
        secret = "super-plain-secret-98765"
        identity.register("holder", secret, Role.TEACHER)
        blob = repr(identity.__dict__)
        assert secret not in blob

/** Client-side mirror of the server's agent-draft validation. The server
 * stays authoritative; this only gives immediate form feedback, so the
 * reason strings match the server's wording. */

export const SUPPORTED_LANGUAGES = ["en", "tw", "dag", "ee"] as const;
export const GRADE_LEVELS = ["EarlyGrade", "UpperPrimary", "JHS"] as const;
export const TONE_MAX_CHARS = 500;

export interface AgentDraftForm {
  display_name: string;
  subject: string;
  grade_level: string;
  tone_descriptor: string;
  language: string;
}

export function validateAgentDraft(draft: AgentDraftForm): string[] {
  const reasons: string[] = [];
  if (!draft.display_name.trim()) {
    reasons.push("display_name must be non-empty");
  }
  if (!(GRADE_LEVELS as readonly string[]).includes(draft.grade_level)) {
    reasons.push(`grade_level must be one of ${JSON.stringify([...GRADE_LEVELS])}`);
  }
  if (!(SUPPORTED_LANGUAGES as readonly string[]).includes(draft.language)) {
    reasons.push(
      `language must be one of ${JSON.stringify([...SUPPORTED_LANGUAGES])}, got '${draft.language}'`,
    );
  }
  if (draft.tone_descriptor.length > TONE_MAX_CHARS) {
    reasons.push(`tone_descriptor exceeds ${TONE_MAX_CHARS} characters`);
  }
  if (!draft.subject.trim()) {
    reasons.push("subject must be non-empty");
  }
  return reasons;
}

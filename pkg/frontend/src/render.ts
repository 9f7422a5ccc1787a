// View renderers. Each function builds an HTML string from API documents;
// main.ts owns the DOM insertion and event wiring. Keeping these pure makes
// every panel testable as a string and keeps clinical content strictly
// whatever the API sent.

import {
  bandClass,
  bandLabel,
  escapeHtml,
  fmtWhen,
  mapCaseErrors,
  sparkline,
  statusLabel,
} from "./format.js";
import type {
  AgentEntry,
  AgentResponseDoc,
  GapCategory,
  GapReportDoc,
  MonitorAlertDoc,
  NewsResultDoc,
  ProblemDocument,
  SeriesPoint,
  TemplateEntry,
  TranscriptDoc,
  VerificationDoc,
} from "./types.js";

const GAP_CATEGORY_ORDER: GapCategory[] = [
  "diagnosis",
  "treatment",
  "monitoring",
  "coordination",
];

// ---------------------------------------------------------------------------
// Case editor
// ---------------------------------------------------------------------------

export interface CaseEditorState {
  json: string;
  problem: ProblemDocument | null;
}

export function renderCaseEditor(state: CaseEditorState): string {
  const errors = state.problem ? mapCaseErrors(state.problem) : null;
  const rows: string[] = [];
  if (errors) {
    for (const message of errors.general) {
      rows.push(`<li class="field-error" data-field="">${escapeHtml(message)}</li>`);
    }
    for (const [field, messages] of Object.entries(errors.byField)) {
      for (const message of messages) {
        rows.push(
          `<li class="field-error" data-field="${escapeHtml(field)}">` +
            `<code>${escapeHtml(field)}</code> ${escapeHtml(message)}</li>`,
        );
      }
    }
  }
  return `
<section class="panel case-editor">
  <h2>Patient case</h2>
  <p class="hint">Paste or edit the case document, then submit. Validation errors come back from the engine and are listed per field.</p>
  <textarea id="case-json" rows="14" spellcheck="false">${escapeHtml(state.json)}</textarea>
  ${rows.length ? `<ul class="error-list" role="alert">${rows.join("")}</ul>` : ""}
  <div class="actions">
    <button type="button" data-action="submit-case">Save case</button>
    <button type="button" data-action="load-sample">Load sample</button>
  </div>
</section>`;
}

// ---------------------------------------------------------------------------
// FAQ picker
// ---------------------------------------------------------------------------

export function renderFaqPicker(templates: TemplateEntry[], selected: string | null): string {
  const options = templates
    .map((template) => {
      const checked = template.id === selected ? " checked" : "";
      return `
    <label class="faq-option">
      <input type="radio" name="faq" value="${escapeHtml(template.id)}"${checked}>
      <span class="faq-title">${escapeHtml(template.title)}</span>
    </label>`;
    })
    .join("");
  const freeChecked = selected === null ? " checked" : "";
  return `
<section class="panel faq-picker">
  <h2>Consultation question</h2>
  <div class="faq-options">${options}
    <label class="faq-option">
      <input type="radio" name="faq" value=""${freeChecked}>
      <span class="faq-title">Free-text question</span>
    </label>
  </div>
  <textarea id="free-question" rows="2" placeholder="Ask the team a question"></textarea>
  <div class="actions">
    <button type="button" data-action="start-consultation">Run consultation</button>
  </div>
</section>`;
}

// ---------------------------------------------------------------------------
// Team board
// ---------------------------------------------------------------------------

export interface TeamCard {
  role: string;
  displayName: string;
  status: AgentResponseDoc["status"] | "pending";
  latencyMs: number | null;
  assessment: string;
  planLines: string[];
}

export function teamCards(
  roster: AgentEntry[],
  responses: AgentResponseDoc[] | null,
): TeamCard[] {
  const byRole = new Map<string, AgentResponseDoc>();
  for (const response of responses ?? []) {
    byRole.set(response.role, response);
  }
  return roster.map((agent) => {
    const response = byRole.get(agent.role);
    return {
      role: agent.role,
      displayName: agent.display_name,
      status: response ? response.status : "pending",
      latencyMs: response ? response.latency_ms : null,
      assessment: response?.sections?.assessment ?? "",
      planLines: response?.sections?.plan ?? [],
    };
  });
}

export function renderTeamBoard(cards: TeamCard[]): string {
  const items = cards
    .map((card) => {
      const plan = card.planLines
        .map((line) => `<li>${escapeHtml(line)}</li>`)
        .join("");
      return `
  <article class="agent-card status-${card.status}" data-role="${escapeHtml(card.role)}">
    <header>
      <span class="agent-name">${escapeHtml(card.displayName)}</span>
      <span class="agent-status">${statusLabel(card.status)}</span>
    </header>
    ${card.latencyMs !== null ? `<span class="latency">${card.latencyMs} ms</span>` : ""}
    ${card.assessment ? `<p class="assessment">${escapeHtml(card.assessment)}</p>` : ""}
    ${plan ? `<ul class="plan">${plan}</ul>` : ""}
  </article>`;
    })
    .join("");
  return `<section class="panel team-board"><h2>Team board</h2><div class="cards">${items}</div></section>`;
}

// ---------------------------------------------------------------------------
// Synthesis + verification
// ---------------------------------------------------------------------------

function renderVerification(verification: VerificationDoc | null): string {
  if (!verification) return "";
  const flags = verification.flags
    .map(
      (flag) => `
    <li class="flag" data-role="${escapeHtml(flag.claim.source_role)}" data-claim="${escapeHtml(flag.claim.name)}">
      <span class="flag-reason">${escapeHtml(flag.reason)}</span>
      <code>${escapeHtml(flag.claim.name)}</code> from ${escapeHtml(flag.claim.source_role)}:
      claimed <span class="asserted-value">${escapeHtml(flag.claim.asserted_value)}</span>,
      record shows <mark class="record-value">${escapeHtml(flag.record_value)}</mark>
    </li>`,
    )
    .join("");
  return `
  <div class="verification verdict-${verification.verdict}">
    <h3>Verification</h3>
    <p>${verification.checked} claims checked, verdict: <strong>${escapeHtml(verification.verdict)}</strong></p>
    ${flags ? `<ul class="flags">${flags}</ul>` : `<p class="all-clear">No mismatches against the record.</p>`}
  </div>`;
}

export function renderSynthesisPanel(transcript: TranscriptDoc): string {
  const synthesis = transcript.synthesis;
  if (!synthesis) {
    const note = transcript.degraded_team
      ? "Not enough physician responses for a synthesis round (degraded team)."
      : "No synthesis was produced for this consultation.";
    return `<section class="panel synthesis-panel empty"><h2>Synthesis</h2><p class="empty-state">${note}</p>${renderVerification(transcript.verification)}</section>`;
  }
  const list = (items: string[]) =>
    items.map((item) => `<li>${escapeHtml(item)}</li>`).join("");
  const divergence = synthesis.divergence
    .map(
      (point) => `
    <li><strong>${escapeHtml(point.topic)}</strong>: ${point.positions
        .map((p) => `${escapeHtml(p.role)} holds ${escapeHtml(p.position)}`)
        .join("; ")}</li>`,
    )
    .join("");
  return `
<section class="panel synthesis-panel">
  <h2>Synthesis</h2>
  <p class="final-diagnosis">Final diagnosis: <strong>${escapeHtml(synthesis.final_diagnosis)}</strong></p>
  <h3>Consensus</h3>
  <ul class="consensus">${list(synthesis.consensus)}</ul>
  ${divergence ? `<h3>Divergence</h3><ul class="divergence">${divergence}</ul>` : ""}
  <h3>Care plan</h3>
  <ol class="care-plan">${list(synthesis.care_plan)}</ol>
  <h3>Next steps</h3>
  <ol class="next-steps">${list(synthesis.next_steps)}</ol>
  <p class="contributors">Contributing roles: ${synthesis.contributing_roles.map(escapeHtml).join(", ")}</p>
  ${renderVerification(transcript.verification)}
</section>`;
}

// ---------------------------------------------------------------------------
// Care gaps
// ---------------------------------------------------------------------------

export function renderGapTable(report: GapReportDoc): string {
  const sections = GAP_CATEGORY_ORDER.map((category) => {
    const findings = report.categories[category] ?? [];
    const rows = findings
      .map(
        (finding) => `
      <tr>
        <td class="finding">${escapeHtml(finding.finding)}</td>
        <td class="raised-by">${finding.raised_by.map(escapeHtml).join(", ")}</td>
      </tr>`,
      )
      .join("");
    return `
  <tbody class="gap-category" data-category="${category}">
    <tr class="category-row"><th colspan="2">${category} (${findings.length})</th></tr>
    ${rows || `<tr><td colspan="2" class="empty-state">No findings.</td></tr>`}
  </tbody>`;
  }).join("");
  return `
<section class="panel gap-table">
  <h2>Care gaps</h2>
  <p class="gap-summary">${escapeHtml(report.summary)}</p>
  <table>
    <thead><tr><th>Finding</th><th>Raised by</th></tr></thead>
    ${sections}
  </table>
</section>`;
}

// ---------------------------------------------------------------------------
// Specialist consult
// ---------------------------------------------------------------------------

export function renderSpecialistPicker(consultRoster: AgentEntry[]): string {
  const options = consultRoster
    .map(
      (agent) =>
        `<option value="${escapeHtml(agent.display_name)}">${escapeHtml(agent.display_name)}</option>`,
    )
    .join("");
  return `
<section class="panel specialist-picker">
  <h2>Specialist consult</h2>
  <select id="specialty">${options}</select>
  <textarea id="consult-question" rows="2" placeholder="Consult question"></textarea>
  <div class="actions">
    <button type="button" data-action="run-consult">Consult</button>
  </div>
</section>`;
}

export function renderSpecialistResult(transcript: TranscriptDoc): string {
  const response = transcript.responses[0];
  if (!response || !response.sections) {
    return `<section class="panel specialist-result"><p class="empty-state">The specialist did not answer.</p></section>`;
  }
  const plan = response.sections.plan.map((line) => `<li>${escapeHtml(line)}</li>`).join("");
  return `
<section class="panel specialist-result" data-role="${escapeHtml(response.role)}">
  <h2>${escapeHtml(response.role)}</h2>
  <p class="assessment">${escapeHtml(response.sections.assessment)}</p>
  ${plan ? `<ul class="plan">${plan}</ul>` : ""}
  ${renderVerification(transcript.verification)}
</section>`;
}

// ---------------------------------------------------------------------------
// Risk panel
// ---------------------------------------------------------------------------

export function renderRiskPanel(
  latest: NewsResultDoc | null,
  series: SeriesPoint[],
  alerts: MonitorAlertDoc[],
): string {
  if (!latest && series.length === 0) {
    return `<section class="panel risk-panel"><h2>Early-warning trend</h2><p class="empty-state">No vitals recorded yet.</p></section>`;
  }
  const line = sparkline(series, 220, 48);
  const chips = series
    .map(
      (point) =>
        `<span class="chip ${bandClass(point.band)}" title="${escapeHtml(fmtWhen(point.at))}">` +
        `${point.total} ${escapeHtml(bandLabel(point.band))}</span>`,
    )
    .join("");
  const alertRows = alerts
    .map(
      (alert) => `
    <li class="alert">
      <span class="when">${escapeHtml(fmtWhen(alert.at))}</span>
      ${escapeHtml(bandLabel(alert.previous_band))} to
      <strong class="${bandClass(alert.new_band)}">${escapeHtml(bandLabel(alert.new_band))}</strong>
      (total ${alert.news.total}): ${escapeHtml(alert.recommendation)}
    </li>`,
    )
    .join("");
  const subscores = latest
    ? Object.entries(latest.subscores)
        .map(
          ([name, score]) =>
            `<span class="subscore" data-param="${escapeHtml(name)}">${escapeHtml(name)} ${score}</span>`,
        )
        .join("")
    : "";
  return `
<section class="panel risk-panel">
  <h2>Early-warning trend</h2>
  ${
    latest
      ? `<p class="news-now">Current score <strong class="news-total">${latest.total}</strong>
         <span class="chip ${bandClass(latest.band)}">${escapeHtml(bandLabel(latest.band))}</span></p>
         <p class="subscores">${subscores}</p>`
      : ""
  }
  <svg class="sparkline" viewBox="0 0 220 48" role="img" aria-label="score trend">
    <polyline fill="none" stroke="currentColor" stroke-width="1.5" points="${line.points}"></polyline>
  </svg>
  <div class="band-chips">${chips}</div>
  ${alertRows ? `<h3>Escalations</h3><ul class="alerts">${alertRows}</ul>` : `<p class="all-clear">No escalation alerts.</p>`}
</section>`;
}

// ---------------------------------------------------------------------------
// Navigator
// ---------------------------------------------------------------------------

export function renderNavigator(text: string): string {
  const paragraphs = text
    .split(/\n{2,}/)
    .map((block) => `<p>${escapeHtml(block.trim())}</p>`)
    .join("");
  return `<section class="panel navigator"><h2>Patient navigator</h2>${paragraphs}</section>`;
}

// ---------------------------------------------------------------------------
// Problems, status, empty states
// ---------------------------------------------------------------------------

export function renderProblem(problem: ProblemDocument, retryAction?: string): string {
  return `
<div class="problem" role="alert" data-code="${escapeHtml(problem.code)}">
  <strong>${escapeHtml(problem.code)}</strong>: ${escapeHtml(problem.message)}
  ${retryAction ? `<button type="button" data-action="${escapeHtml(retryAction)}">Retry</button>` : ""}
</div>`;
}

export function renderJobStatus(transcriptId: string, status: string): string {
  return `
<div class="job-status" data-transcript="${escapeHtml(transcriptId)}">
  Consultation <a href="#/transcript/${encodeURIComponent(transcriptId)}"><code>${escapeHtml(transcriptId)}</code></a>:
  <span class="status">${escapeHtml(status)}</span>
</div>`;
}

export function renderEmptyConsole(): string {
  return `
<section class="panel empty-console">
  <h2>No active case</h2>
  <p class="empty-state">Create or load a patient case to start a team consultation.</p>
</section>`;
}

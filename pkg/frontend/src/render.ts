import type { TriageModel, TriageRow } from './triage.js';
import type { ReviewModel } from './review.js';

function esc(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function badgeHtml(row: TriageRow): string {
  const badges: string[] = [];
  if (row.inTruth) badges.push('<span class="badge truth">ground truth</span>');
  if (row.consensus === 'linked') badges.push('<span class="badge enriched">enriched</span>');
  if (row.consensus === 'not-linked') badges.push('<span class="badge rejected">rejected</span>');
  return badges.join(' ');
}

/** Ranked list: greyed rows stay visible so the threshold boundary is auditable. */
export function renderTriage(model: TriageModel): string {
  if (model.status === 'error') {
    return `<div class="error-state">service unavailable: ${esc(model.error)} ` +
      `<button data-action="retry">retry</button></div>`;
  }
  if (model.status === 'loading') {
    return '<div class="loading-state">ranking…</div>';
  }
  if (model.status === 'idle') {
    return '<div class="empty-state">submit attack text or pick an entry to explore</div>';
  }
  const rows = model.rows()
    .map(
      (row, index) => `
    <tr class="${row.greyed ? 'greyed' : 'kept'}" data-cve="${esc(row.cve)}">
      <td class="rank">${index + 1}</td>
      <td class="cve">${esc(row.cve)}</td>
      <td class="score"><div class="bar" style="width:${row.display}%"></div>
        <span>${row.display}</span></td>
      <td class="title">${esc(row.title)} ${badgeHtml(row)}</td>
    </tr>`,
    )
    .join('');
  return `<table class="ranking">
    <thead><tr><th>#</th><th>CVE</th><th>score</th><th>description</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>
  <div class="cut-note">${model.keptCount()} of ${model.rows().length} above ρ=${model.rho}</div>`;
}

/** Current pair panel for the keyboard-driven review flow. */
export function renderReview(model: ReviewModel): string {
  if (model.status === 'error') {
    return `<div class="error-state">queue unavailable: ${esc(model.error)}</div>`;
  }
  const pair = model.current();
  const conflict = model.conflict
    ? `<div class="conflict">another reviewer finalized this pair: ${esc(model.conflict)}</div>`
    : '';
  if (!pair) {
    return `${conflict}<div class="empty-state">review queue is empty — ` +
      `${model.outcomes.length} verdicts recorded this session</div>`;
  }
  return `${conflict}
  <div class="pair" data-pair="${esc(pair.attack)}|${esc(pair.cve)}">
    <div class="pair-head">
      <span class="pair-ids">${esc(pair.attack)} → ${esc(pair.cve)}</span>
      <span class="pair-score">score ${pair.display}</span>
      <span class="badge ${model.badge(pair)}">${model.badge(pair)}</span>
      <span class="queue-pos">${model.remaining()} pending</span>
    </div>
    <div class="pair-texts">
      <div class="attack-text"><h4>${esc(pair.attack)}</h4><p>${esc(pair.attack_text)}</p></div>
      <div class="cve-text"><h4>${esc(pair.cve)}</h4><p>${esc(pair.cve_text)}</p></div>
    </div>
    <div class="verdict-keys">
      <button data-action="accept">link <kbd>a</kbd></button>
      <button data-action="reject">not linked <kbd>r</kbd></button>
      <button data-action="skip">skip <kbd>s</kbd></button>
    </div>
  </div>`;
}

// Minimal deterministic SVG line charts: fixed layout, fixed palette,
// fixed number formatting, so identical inputs give identical bytes.

import { Series } from './csv.js'

const W = 760
const H = 460
const M = { top: 36, right: 24, bottom: 52, left: 86 }
const PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e',
  '#8c564b', '#17becf']

function fmt(v: number): string {
  return Number(v.toPrecision(6)).toString()
}

function tickLabel(v: number): string {
  const a = Math.abs(v)
  if (a >= 1e4 || (a > 0 && a < 1e-2)) {
    return v.toExponential(1).replace('e+', 'e')
  }
  return Number(v.toPrecision(4)).toString()
}

function niceTicks(lo: number, hi: number, n = 6): number[] {
  if (!(hi > lo)) return [lo]
  const span = hi - lo
  const step0 = span / (n - 1)
  const mag = Math.pow(10, Math.floor(Math.log10(step0)))
  const step = [1, 2, 2.5, 5, 10]
    .map((m) => m * mag)
    .find((s) => span / s <= n - 1) ?? 10 * mag
  const first = Math.ceil(lo / step) * step
  const ticks: number[] = []
  for (let v = first; v <= hi + 1e-12 * span; v += step) ticks.push(v)
  return ticks
}

export interface ChartOptions {
  title: string
  xLabel: string
  yLabel: string
  legend: boolean
}

export function lineChart(series: Series[], opts: ChartOptions): string {
  const xs = series.flatMap((s) => s.t)
  const ys = series.flatMap((s) => s.beta)
  const xLo = Math.min(...xs)
  const xHi = Math.max(...xs)
  let yLo = Math.min(...ys, 0)
  let yHi = Math.max(...ys)
  if (yHi === yLo) yHi = yLo + 1
  const pad = 0.04 * (yHi - yLo)
  yLo -= pad
  yHi += pad

  const px = (x: number) =>
    M.left + ((x - xLo) / (xHi - xLo)) * (W - M.left - M.right)
  const py = (y: number) =>
    H - M.bottom - ((y - yLo) / (yHi - yLo)) * (H - M.top - M.bottom)

  const parts: string[] = []
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" ` +
    `height="${H}" viewBox="0 0 ${W} ${H}" font-family="sans-serif">`)
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`)
  parts.push(`<text x="${W / 2}" y="22" text-anchor="middle" ` +
    `font-size="15">${opts.title}</text>`)

  for (const tx of niceTicks(xLo, xHi)) {
    const x = fmt(px(tx))
    parts.push(`<line x1="${x}" y1="${M.top}" x2="${x}" ` +
      `y2="${H - M.bottom}" stroke="#dddddd" stroke-width="1"/>`)
    parts.push(`<text x="${x}" y="${H - M.bottom + 18}" ` +
      `text-anchor="middle" font-size="11">${tickLabel(tx)}</text>`)
  }
  for (const ty of niceTicks(yLo, yHi)) {
    const y = fmt(py(ty))
    parts.push(`<line x1="${M.left}" y1="${y}" x2="${W - M.right}" ` +
      `y2="${y}" stroke="#dddddd" stroke-width="1"/>`)
    parts.push(`<text x="${M.left - 8}" y="${y}" text-anchor="end" ` +
      `dominant-baseline="middle" font-size="11">${tickLabel(ty)}</text>`)
  }
  parts.push(`<rect x="${M.left}" y="${M.top}" ` +
    `width="${W - M.left - M.right}" height="${H - M.top - M.bottom}" ` +
    `fill="none" stroke="#333333"/>`)
  parts.push(`<text x="${(M.left + W - M.right) / 2}" y="${H - 14}" ` +
    `text-anchor="middle" font-size="13">${opts.xLabel}</text>`)
  parts.push(`<text x="20" y="${(M.top + H - M.bottom) / 2}" ` +
    `text-anchor="middle" font-size="13" ` +
    `transform="rotate(-90 20 ${(M.top + H - M.bottom) / 2})">` +
    `${opts.yLabel}</text>`)

  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length]
    const pts = s.t.map((t, j) => `${fmt(px(t))},${fmt(py(s.beta[j]))}`)
    parts.push(`<polyline points="${pts.join(' ')}" fill="none" ` +
      `stroke="${color}" stroke-width="1.3"/>`)
  })

  if (opts.legend && series.length > 1) {
    series.forEach((s, i) => {
      const y = M.top + 16 + 18 * i
      const color = PALETTE[i % PALETTE.length]
      parts.push(`<line x1="${M.left + 12}" y1="${y}" ` +
        `x2="${M.left + 40}" y2="${y}" stroke="${color}" ` +
        `stroke-width="2"/>`)
      parts.push(`<text x="${M.left + 46}" y="${y + 4}" ` +
        `font-size="12">${s.label}</text>`)
    })
  }
  parts.push('</svg>')
  return parts.join('\n') + '\n'
}

use std::io::{Read, Write};

use super::{Channel, TimeTagRecord};
use crate::error::{Error, Result};

const HEADER: [&str; 3] = ["trigger_id", "channel", "time_ps"];

/// Reads `trigger_id,channel,time_ps` rows. Errors carry the 1-based line.
pub fn read_timetags<R: Read>(input: R) -> Result<Vec<TimeTagRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse { line, message: e.to_string() }
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        let trigger_id = row[0]
            .parse::<u64>()
            .map_err(|_| bad(format!("invalid trigger id `{}`", &row[0])))?;
        let channel = row[1].parse::<Channel>().map_err(bad)?;
        let time_ps = match row[2].parse::<i64>() {
            Ok(t) if t < 0 => return Err(bad(format!("negative time {t}"))),
            Ok(t) => t as u64,
            Err(_) => return Err(bad(format!("time `{}` is not an integer number of ps", &row[2]))),
        };
        out.push(TimeTagRecord { trigger_id, channel, time_ps });
    }
    Ok(out)
}

pub fn write_timetags<W: Write>(records: &[TimeTagRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(&[r.trigger_id.to_string(), r.channel.label().to_string(), r.time_ps.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_is_empty() {
        assert!(read_timetags("trigger_id,channel,time_ps\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn parses_a_line() {
        let r = read_timetags("trigger_id,channel,time_ps\n7,sc,1625\n".as_bytes()).unwrap();
        assert_eq!(r, vec![TimeTagRecord { trigger_id: 7, channel: Channel::Sc, time_ps: 1625 }]);
    }

    #[test]
    fn bad_lines_report_their_line_number() {
        let cases = [
            "trigger_id,channel,time_ps\n1,s,5\n2,x,5\n",
            "trigger_id,channel,time_ps\n1,s,5\n2,c,-3\n",
            "trigger_id,channel,time_ps\n1,s,5\n2,c,3.5\n",
        ];
        for text in cases {
            match read_timetags(text.as_bytes()) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(matches!(
            read_timetags("id,channel,time\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn roundtrip() {
        let recs: Vec<_> = (0..50)
            .map(|i| TimeTagRecord {
                trigger_id: i / 3,
                channel: Channel::ALL[(i % 3) as usize],
                time_ps: i * 977,
            })
            .collect();
        let mut buf = Vec::new();
        write_timetags(&recs, &mut buf).unwrap();
        assert_eq!(read_timetags(buf.as_slice()).unwrap(), recs);
    }
}

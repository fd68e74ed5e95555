from poserefine.cli import main

raise SystemExit(main())
